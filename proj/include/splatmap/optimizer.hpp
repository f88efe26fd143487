#pragma once

#include "splatmap/gaussian_map.hpp"
#include "splatmap/losses.hpp"

namespace splatmap {

struct AdamParams {
    double lr_center = 1e-4;
    double lr_radius = 5e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;
    double lr_sem = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Damped epsilon for the semantic probs: densified splats start near
    // their optimum, where bias-corrected sign-steps would otherwise random
    // walk them away from it.
    double eps_sem = 1e-3;
};

/// Adam moments for every splat parameter group. Grows with the map and is
/// compacted alongside opacity pruning.
class AdamState {
public:
    void ensure_size(const GaussianMap& map) {
        grow(m_center_, v_center_, map.size() * 3);
        grow(m_radius_, v_radius_, map.size());
        grow(m_opacity_, v_opacity_, map.size());
        grow(m_color_, v_color_, map.size() * 3);
        grow(m_sem_, v_sem_, map.size() * map.k());
    }

    /// One optimizer step. Semantic probs get the step applied through the
    /// sparse-vector update rule (clamp, renormalize, uniform on collapse).
    void step(GaussianMap& map, const ParamGradients& g, const AdamParams& p);

    /// Keeps only the splats listed in `kept` (old indices, ascending).
    void compact(const std::vector<uint32_t>& kept, int k);

    int64_t step_count() const { return t_; }

private:
    static void grow(std::vector<double>& m, std::vector<double>& v, size_t n) {
        if (m.size() < n) {
            m.resize(n, 0.0);
            v.resize(n, 0.0);
        }
    }
    std::vector<double> m_center_, v_center_;
    std::vector<double> m_radius_, v_radius_;
    std::vector<double> m_opacity_, v_opacity_;
    std::vector<double> m_color_, v_color_;
    std::vector<double> m_sem_, v_sem_;
    int64_t t_ = 0;
};

}  // namespace splatmap
