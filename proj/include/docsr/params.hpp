#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "docsr/tape.hpp"
#include "docsr/tensor.hpp"

namespace docsr {

// Ordered collection of named parameter tensors. Order is the
// construction order and is part of the checkpoint format.
class ParamStore {
public:
    int add(const std::string& name, Tensor t);
    Tensor& operator[](const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    size_t count() const { return items_.size(); }
    Tensor& tensor(size_t i) { return items_[i].second; }
    const Tensor& tensor(size_t i) const { return items_[i].second; }
    const std::string& name(size_t i) const { return items_[i].first; }

    int64_t total_size() const;
    bool all_finite() const;

    // FNV-1a over the raw bytes of every tensor, in store order. Used for
    // the supervisor freezing fingerprint and the trainer's
    // only-the-generator-changes check.
    uint64_t fingerprint() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

// Pushes every parameter onto a tape (as trainable inputs or constants)
// and remembers the node ids so gradients can be read back per parameter.
struct ParamNodes {
    std::vector<int> ids;
    int node(size_t i) const { return ids[i]; }
};

ParamNodes push_params(Tape& tape, const ParamStore& store, bool trainable);

}  // namespace docsr
