#pragma once

#include <string>
#include <vector>

#include "taper/graph.hpp"
#include "taper/schemes.hpp"

namespace taper {

// Versioned JSON model format: graph topology plus base64 little-endian
// float64 parameter blobs. The explicit edge list makes DAGs (residual
// blocks) representable.

std::string model_to_json(const ModelGraph& graph);
ModelGraph model_from_json(const std::string& text);

void save_model(const ModelGraph& graph, const std::string& path);
ModelGraph load_model(const std::string& path);

// Structure masks: {"version":1, "masks":{"<layer name>":[0,1,...]}}
std::string masks_to_json(const ModelGraph& graph, const StructureMasks& masks);
StructureMasks masks_from_json(const ModelGraph& graph, const std::string& text);
void save_masks(const ModelGraph& graph, const StructureMasks& masks, const std::string& path);
StructureMasks load_masks(const ModelGraph& graph, const std::string& path);

std::string base64_encode(const unsigned char* data, std::size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace taper
