#include "sun/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sun/error.hpp"

namespace sun {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

}  // namespace

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw data_error("parameter '" + name + "' already registered");
    index_[name] = entries_.size();
    entries_.emplace_back(name, std::move(t));
    return entries_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw data_error("unknown parameter '" + name + "'");
    return entries_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw data_error("unknown parameter '" + name + "'");
    return entries_[it->second].second;
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

void ParamStore::save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = kVersion;
    auto names = nlohmann::json::array();
    auto shapes = nlohmann::json::array();
    for (const auto& [name, t] : entries_) {
        names.push_back(name);
        auto sh = nlohmann::json::array();
        for (auto d : t.shape()) sh.push_back(d);
        shapes.push_back(sh);
    }
    header["names"] = names;
    header["shapes"] = shapes;
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = header_str.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : entries_) {
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw data_error("failed writing checkpoint: " + path);
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw data_error("cannot open checkpoint: " + path);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    char magic[8];
    std::uint64_t hlen = 0;
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw data_error("bad checkpoint magic in " + path);
    }
    if (!in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen)) ||
        hlen > file_size - sizeof(magic) - sizeof(hlen)) {
        throw data_error("corrupt checkpoint header length in " + path);
    }
    std::string header_str(hlen, '\0');
    if (!in.read(header_str.data(), static_cast<std::streamsize>(hlen))) {
        throw data_error("truncated checkpoint header in " + path);
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw data_error("malformed checkpoint header: " + std::string(e.what()));
    }
    if (!header.contains("version") || header["version"].get<int>() != kVersion) {
        throw data_error("unsupported checkpoint version in " + path);
    }
    const auto& names = header.at("names");
    const auto& shapes = header.at("shapes");
    if (names.size() != shapes.size()) throw data_error("checkpoint names/shapes disagree");

    std::size_t total = 0;
    std::vector<Shape> parsed_shapes;
    for (const auto& sh : shapes) {
        Shape s;
        std::size_t n = 1;
        for (const auto& d : sh) {
            s.push_back(d.get<std::size_t>());
            n *= s.back();
        }
        parsed_shapes.push_back(std::move(s));
        total += n;
    }
    const std::uint64_t expected = sizeof(magic) + sizeof(hlen) + hlen + total * sizeof(double);
    if (file_size != expected) {
        throw data_error("checkpoint size mismatch: expected " + std::to_string(expected) +
                         " bytes, file has " + std::to_string(file_size));
    }

    ParamStore store;
    for (std::size_t i = 0; i < parsed_shapes.size(); ++i) {
        std::size_t n = 1;
        for (auto d : parsed_shapes[i]) n *= d;
        std::vector<double> values(n);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        store.add(names[i].get<std::string>(),
                  Tensor::from_data(parsed_shapes[i], std::move(values), true));
    }
    if (!in) throw data_error("truncated checkpoint payload in " + path);
    return store;
}

}  // namespace sun
