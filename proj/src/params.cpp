#include "mcsp/params.hpp"

#include <cmath>

namespace mcsp {

ad::Var ParamStore::create(const std::string& name, Matrix init) {
    if (index_.count(name)) {
        throw ValidationError("ParamStore: duplicate parameter '" + name + "'");
    }
    ad::Var v = ad::parameter(std::move(init));
    index_.emplace(name, names_.size());
    names_.push_back(name);
    vars_.push_back(v);
    return v;
}

ad::Var ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ValidationError("ParamStore: unknown parameter '" + name + "'");
    }
    return vars_[it->second];
}

std::size_t ParamStore::total_parameters() const {
    std::size_t n = 0;
    for (const auto& v : vars_) n += static_cast<std::size_t>(v.value().size());
    return n;
}

std::size_t ParamStore::parameters_matching(
    const std::function<bool(const std::string&)>& pred) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (pred(names_[i])) n += static_cast<std::size_t>(vars_[i].value().size());
    }
    return n;
}

void ParamStore::clear_grads() {
    for (auto& v : vars_) v.clear_grad();
}

Matrix glorot_init(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / double(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    }
    return m;
}

Matrix normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, sigma);
    }
    return m;
}

} // namespace mcsp
