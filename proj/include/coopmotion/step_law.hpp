#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace coopmotion {

/// Law of the step variable D: a bounded integer distribution with support in
/// [-l, s]. The law carries the full step mechanism, including P(D = 0); the
/// walker moves by D only on a friend match, so for Bernoulli cooperative
/// motion the law is {0: 1-q, 1: q}.
class StepLaw {
  public:
    explicit StepLaw(std::vector<std::pair<long long, double>> atoms) {
        double total = 0.0;
        for (auto [d, p] : atoms) {
            if (!(p >= 0.0)) throw std::invalid_argument("StepLaw: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("StepLaw: probabilities must sum to 1");
        std::sort(atoms.begin(), atoms.end());
        for (auto [d, p] : atoms) {
            if (p == 0.0) continue;
            if (!atoms_.empty() && atoms_.back().first == d)
                atoms_.back().second += p;
            else
                atoms_.emplace_back(d, p);
        }
        if (atoms_.empty())
            throw std::invalid_argument("StepLaw: no support");
    }

    static StepLaw bernoulli(double q) {
        return StepLaw({{0, 1.0 - q}, {1, q}});
    }

    /// P(D = g) = q, P(D = 0) = 1 - q.
    static StepLaw scaled_bernoulli(long long g, double q) {
        if (g < 1) throw std::invalid_argument("StepLaw: scale must be >= 1");
        return StepLaw({{0, 1.0 - q}, {g, q}});
    }

    const std::vector<std::pair<long long, double>>& atoms() const { return atoms_; }

    long long min_step() const { return atoms_.front().first; }
    long long max_step() const { return atoms_.back().first; }

    /// l in the support bound [-l, s].
    long long left_range() const { return std::max(0LL, -min_step()); }
    /// s in the support bound [-l, s].
    long long right_range() const { return std::max(0LL, max_step()); }

    double prob(long long d) const {
        for (auto [dd, p] : atoms_)
            if (dd == d) return p;
        return 0.0;
    }

    double prob_ge(long long d) const {
        double s = 0.0;
        for (auto [dd, p] : atoms_)
            if (dd >= d) s += p;
        return s;
    }

    double prob_lt(long long d) const {
        double s = 0.0;
        for (auto [dd, p] : atoms_)
            if (dd < d) s += p;
        return s;
    }

    // Summed directly over the non-zero atoms, not as 1 - P(D=0): single-atom
    // laws must see exactly the stored probability.
    double prob_nonzero() const {
        double s = 0.0;
        for (auto [d, p] : atoms_)
            if (d != 0) s += p;
        return s;
    }

    double prob_abs_above_one() const {
        double s = 0.0;
        for (auto [d, p] : atoms_)
            if (d < -1 || d > 1) s += p;
        return s;
    }

    bool operator==(const StepLaw& o) const { return atoms_ == o.atoms_; }

  private:
    std::vector<std::pair<long long, double>> atoms_;  // sorted, positive mass only
};

}  // namespace coopmotion
