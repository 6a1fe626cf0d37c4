#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/errors.hpp"
#include "mmtalker/feature_container.hpp"
#include "mmtalker/rng.hpp"

namespace mmtalker {

// Named trainable matrices plus their Adam moments. The store is the unit of
// checkpointing; forward passes re-register entries on a fresh tape.
class ParamStore {
public:
    Eigen::MatrixXd& create(const std::string& name, Eigen::MatrixXd init) {
        if (values_.count(name)) throw Error("parameter '" + name + "' already exists");
        order_.push_back(name);
        values_[name] = std::move(init);
        m_[name] = Eigen::MatrixXd::Zero(values_[name].rows(), values_[name].cols());
        v_[name] = Eigen::MatrixXd::Zero(values_[name].rows(), values_[name].cols());
        return values_[name];
    }

    bool has(const std::string& name) const { return values_.count(name) > 0; }

    Eigen::MatrixXd& at(const std::string& name) {
        auto it = values_.find(name);
        if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
        return it->second;
    }
    const Eigen::MatrixXd& at(const std::string& name) const {
        auto it = values_.find(name);
        if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
        return it->second;
    }

    Eigen::MatrixXd& moment1(const std::string& name) { return m_.at(name); }
    Eigen::MatrixXd& moment2(const std::string& name) { return v_.at(name); }

    const std::vector<std::string>& names() const { return order_; }

    std::int64_t step = 0;  // Adam step counter

    void save(const std::string& path, const nlohmann::json& meta = {}) const {
        FeatureContainer fc;
        for (const std::string& n : order_) fc.set_matrix(n, values_.at(n));
        for (const std::string& n : order_) fc.set_matrix("adam_m." + n, m_.at(n));
        for (const std::string& n : order_) fc.set_matrix("adam_v." + n, v_.at(n));
        fc.set_scalar("adam_step", static_cast<double>(step));
        if (!meta.is_null()) fc.meta() = meta;
        fc.save(path);
    }

    static ParamStore load(const std::string& path, nlohmann::json* meta_out = nullptr) {
        const FeatureContainer fc = FeatureContainer::load(path);
        ParamStore store;
        for (const std::string& n : fc.names()) {
            if (n.rfind("adam_", 0) == 0) continue;
            store.create(n, fc.matrix(n));
            store.m_[n] = fc.matrix("adam_m." + n);
            store.v_[n] = fc.matrix("adam_v." + n);
        }
        store.step = static_cast<std::int64_t>(fc.scalar("adam_step"));
        if (meta_out) *meta_out = fc.meta();
        return store;
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, Eigen::MatrixXd> values_;
    std::map<std::string, Eigen::MatrixXd> m_;
    std::map<std::string, Eigen::MatrixXd> v_;
};

// Glorot-style uniform init in +-sqrt(6 / (fan_in + fan_out)); biases zero.
inline Eigen::MatrixXd glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace mmtalker
