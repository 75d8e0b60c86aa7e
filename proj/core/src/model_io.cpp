#include "taper/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "taper/error.hpp"

namespace taper {

namespace {

using nlohmann::json;

constexpr int kModelVersion = 1;
const char kBase64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string encode_tensor(const Tensor& t) {
    // little-endian f64; byte-stable across runs
    std::vector<unsigned char> bytes(t.size() * 8);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(t[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(u >> (8 * b));
    }
    return base64_encode(bytes.data(), bytes.size());
}

Tensor decode_tensor(const std::vector<std::size_t>& shape, const std::string& blob) {
    auto bytes = base64_decode(blob);
    if (bytes.size() != shape_size(shape) * 8) {
        throw Error("parameter blob length does not match its shape");
    }
    std::vector<double> values(shape_size(shape));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b) {
            u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        }
        values[i] = std::bit_cast<double>(u);
    }
    return Tensor(shape, std::move(values));
}

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape()}, {"data", encode_tensor(t)}};
}

Tensor tensor_from_json(const json& j) {
    std::vector<std::size_t> shape = j.at("shape").get<std::vector<std::size_t>>();
    return decode_tensor(shape, j.at("data").get<std::string>());
}

}  // namespace

std::string base64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        unsigned int chunk = static_cast<unsigned int>(data[i]) << 16;
        if (i + 1 < len) chunk |= static_cast<unsigned int>(data[i + 1]) << 8;
        if (i + 2 < len) chunk |= static_cast<unsigned int>(data[i + 2]);
        out.push_back(kBase64Chars[(chunk >> 18) & 0x3f]);
        out.push_back(kBase64Chars[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? kBase64Chars[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? kBase64Chars[chunk & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    unsigned int chunk = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = value_of(c);
        if (v < 0) throw Error("invalid base64 character");
        chunk = (chunk << 6) | static_cast<unsigned int>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((chunk >> bits) & 0xff));
        }
    }
    return out;
}

std::string model_to_json(const ModelGraph& graph) {
    json doc;
    doc["version"] = kModelVersion;
    doc["input_shape"] = graph.input_shape;
    doc["output"] = graph.output_node;
    json nodes = json::array();
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        json jn;
        jn["id"] = v;
        jn["kind"] = layer_kind_name(node.kind);
        jn["name"] = node.name;
        jn["in_shape"] = node.in_shape;
        jn["out_shape"] = node.out_shape;
        if (node.kind == LayerKind::Conv2d) {
            jn["conv"] = {{"kernel_h", node.conv.kernel_h},
                          {"kernel_w", node.conv.kernel_w},
                          {"stride", node.conv.stride},
                          {"padding", node.conv.padding}};
        }
        if (node.weights) jn["weights"] = tensor_to_json(*node.weights);
        if (node.bias) jn["bias"] = tensor_to_json(*node.bias);
        nodes.push_back(std::move(jn));
    }
    doc["nodes"] = std::move(nodes);
    json edges = json::array();
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        for (std::size_t u : graph.preds[v]) edges.push_back(json::array({u, v}));
    }
    doc["edges"] = std::move(edges);
    return doc.dump(2) + "\n";
}

ModelGraph model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("model JSON parse error: ") + e.what());
    }
    try {
        if (doc.at("version").get<int>() != kModelVersion) {
            throw Error("unsupported model version");
        }
        ModelGraph graph;
        graph.input_shape = doc.at("input_shape").get<std::vector<std::size_t>>();
        graph.output_node = doc.at("output").get<std::size_t>();
        const auto& nodes = doc.at("nodes");
        graph.nodes.resize(nodes.size());
        graph.preds.resize(nodes.size());
        for (const auto& jn : nodes) {
            const std::size_t id = jn.at("id").get<std::size_t>();
            if (id >= graph.nodes.size()) throw Error("node id out of range");
            LayerSpec node;
            node.kind = layer_kind_from_name(jn.at("kind").get<std::string>());
            node.name = jn.at("name").get<std::string>();
            if (jn.contains("conv")) {
                node.conv.kernel_h = jn["conv"].at("kernel_h").get<std::size_t>();
                node.conv.kernel_w = jn["conv"].at("kernel_w").get<std::size_t>();
                node.conv.stride = jn["conv"].at("stride").get<std::size_t>();
                node.conv.padding = jn["conv"].at("padding").get<std::size_t>();
            }
            if (jn.contains("weights")) node.weights = tensor_from_json(jn["weights"]);
            if (jn.contains("bias")) node.bias = tensor_from_json(jn["bias"]);
            graph.nodes[id] = std::move(node);
        }
        for (const auto& edge : doc.at("edges")) {
            const std::size_t u = edge.at(0).get<std::size_t>();
            const std::size_t v = edge.at(1).get<std::size_t>();
            if (u >= graph.nodes.size() || v >= graph.nodes.size()) {
                throw Error("edge references unknown node");
            }
            graph.preds[v].push_back(u);
        }
        return trace_graph(graph);
    } catch (const json::exception& e) {
        throw Error(std::string("model JSON field error: ") + e.what());
    }
}

void save_model(const ModelGraph& graph, const std::string& path) {
    write_text_file(path, model_to_json(graph));
}

ModelGraph load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

std::string masks_to_json(const ModelGraph& graph, const StructureMasks& masks) {
    json doc;
    doc["version"] = 1;
    json m = json::object();
    for (const auto& [node_id, flags] : masks.keep) {
        std::vector<int> ints(flags.begin(), flags.end());
        m[graph.nodes.at(node_id).name] = ints;
    }
    doc["masks"] = std::move(m);
    return doc.dump(2) + "\n";
}

StructureMasks masks_from_json(const ModelGraph& graph, const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("masks JSON parse error: ") + e.what());
    }
    StructureMasks masks;
    for (const auto& [name, flags] : doc.at("masks").items()) {
        bool found = false;
        for (std::size_t v = 0; v < graph.node_count(); ++v) {
            if (graph.nodes[v].name == name) {
                std::vector<std::uint8_t> keep;
                for (const auto& f : flags) keep.push_back(f.get<int>() ? 1 : 0);
                masks.keep.emplace(v, std::move(keep));
                found = true;
                break;
            }
        }
        if (!found) throw Error("masks reference unknown layer '" + name + "'");
    }
    return masks;
}

void save_masks(const ModelGraph& graph, const StructureMasks& masks, const std::string& path) {
    write_text_file(path, masks_to_json(graph, masks));
}

StructureMasks load_masks(const ModelGraph& graph, const std::string& path) {
    return masks_from_json(graph, read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file '" + path + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace taper
