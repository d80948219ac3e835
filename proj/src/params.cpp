#include "docsr/params.hpp"

#include <cstring>

namespace docsr {

int ParamStore::add(const std::string& name, Tensor t) {
    if (has(name)) throw ContractError("duplicate parameter name: " + name);
    items_.emplace_back(name, std::move(t));
    return static_cast<int>(items_.size()) - 1;
}

Tensor& ParamStore::operator[](const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return t;
    throw ContractError("unknown parameter: " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw ContractError("unknown parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return true;
    return false;
}

int64_t ParamStore::total_size() const {
    int64_t n = 0;
    for (const auto& [_, t] : items_) n += t.size();
    return n;
}

bool ParamStore::all_finite() const {
    for (const auto& [_, t] : items_)
        if (!t.all_finite()) return false;
    return true;
}

uint64_t ParamStore::fingerprint() const {
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, t] : items_) {
        mix(name.data(), name.size());
        mix(t.data(), static_cast<size_t>(t.size()) * sizeof(double));
    }
    return h;
}

ParamNodes push_params(Tape& tape, const ParamStore& store, bool trainable) {
    ParamNodes nodes;
    nodes.ids.reserve(store.count());
    for (size_t i = 0; i < store.count(); ++i)
        nodes.ids.push_back(tape.input(store.tensor(i), trainable));
    return nodes;
}

}  // namespace docsr
