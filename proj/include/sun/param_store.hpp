#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sun/tensor.hpp"

namespace sun {

// Ordered, uniquely-named collection of trainable tensors. Iteration order is
// insertion order and is part of the checkpoint contract.
class ParamStore {
 public:
    explicit ParamStore(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return entries_.size(); }
    const std::string& name_at(std::size_t i) const { return entries_[i].first; }
    Tensor& tensor_at(std::size_t i) { return entries_[i].second; }
    const Tensor& tensor_at(std::size_t i) const { return entries_[i].second; }

    std::uint64_t rng_seed() const { return rng_seed_; }
    std::size_t total_elements() const;
    void zero_grads();

    // Checkpoint format: magic "SUNCKPT1", u64 little-endian header length,
    // JSON header {version, names, shapes}, then all values as little-endian
    // f64 in header order.
    void save(const std::string& path) const;
    static ParamStore load(const std::string& path);

 private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t rng_seed_;
};

}  // namespace sun
