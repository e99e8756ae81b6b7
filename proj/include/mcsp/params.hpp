#pragma once

#include "mcsp/autodiff.hpp"
#include "mcsp/rng.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mcsp {

// Named parameter tensors in a fixed creation order. The order defines
// optimizer iteration, checkpoint layout, and rng consumption at init, so it
// must be deterministic.
class ParamStore {
public:
    ad::Var create(const std::string& name, Matrix init);
    ad::Var get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    std::size_t total_parameters() const;
    std::size_t parameters_matching(
        const std::function<bool(const std::string&)>& pred) const;

    void clear_grads();

private:
    std::vector<std::string> names_;
    std::vector<ad::Var> vars_;
    std::map<std::string, std::size_t> index_;
};

// Glorot-uniform matrix; bound sqrt(6 / (fan_in + fan_out)).
Matrix glorot_init(Rng& rng, Eigen::Index rows, Eigen::Index cols);
Matrix normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma);

} // namespace mcsp
