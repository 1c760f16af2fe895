#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coopmotion {

/// Absolute tolerance on total mass; violations raise, never renormalize.
inline constexpr double kMassTolerance = 1e-12;

/// Window-edge atoms below this are folded into the adjacent cell.
inline constexpr double kTrimThreshold = 1e-300;

namespace detail {

// Neumaier-compensated sum; the mass checks should not be limited by the
// accuracy of the check itself.
inline double compensated_sum(std::span<const double> xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    return s + c;
}

}  // namespace detail

/// Probability distribution on Z extended by atoms at -inf and +inf.
/// Finite mass lives in a dense window: mass()[i] = P(X = offset() + i).
/// Values are immutable after construction; all operations are pure.
class LatticeDist {
  public:
    LatticeDist(long long offset, std::vector<double> mass,
                double mass_neg_inf = 0.0, double mass_pos_inf = 0.0)
        : offset_(offset), mass_(std::move(mass)),
          neg_(mass_neg_inf), pos_(mass_pos_inf) {
        validate_entries();
        trim();
        build_cdf();
        validate_total();
    }

    static LatticeDist point_mass(long long site) {
        return LatticeDist(site, {1.0});
    }

    /// Uniform on {lo, ..., hi}.
    static LatticeDist uniform(long long lo, long long hi) {
        if (hi < lo) throw std::invalid_argument("LatticeDist::uniform: hi < lo");
        auto n = static_cast<std::size_t>(hi - lo + 1);
        return LatticeDist(lo, std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    long long offset() const { return offset_; }
    std::span<const double> mass() const { return mass_; }
    double mass_neg_inf() const { return neg_; }
    double mass_pos_inf() const { return pos_; }

    /// First and last sites carrying finite mass. Only valid when the finite
    /// part is non-empty.
    long long min_site() const { return offset_; }
    long long max_site() const {
        return offset_ + static_cast<long long>(mass_.size()) - 1;
    }
    bool finite_part_empty() const { return mass_.empty(); }

    double pmf_at(long long k) const {
        if (mass_.empty() || k < offset_ ||
            k >= offset_ + static_cast<long long>(mass_.size()))
            return 0.0;
        return mass_[static_cast<std::size_t>(k - offset_)];
    }

    /// F(k) = P(X < k), strict. Non-decreasing in k; tends to mass_neg_inf as
    /// k -> -inf and to 1 - mass_pos_inf as k -> +inf.
    double cdf_at(long long k) const {
        if (k <= offset_ || mass_.empty()) return cdf_[0];
        auto idx = k - offset_;
        if (idx >= static_cast<long long>(mass_.size()))
            return cdf_.back();
        return cdf_[static_cast<std::size_t>(idx)];
    }

    /// Largest single atom, extended atoms included.
    double max_atom() const {
        double best = std::max(neg_, pos_);
        for (double p : mass_) best = std::max(best, p);
        return best;
    }

    bool operator==(const LatticeDist& o) const {
        return offset_ == o.offset_ && mass_ == o.mass_ &&
               neg_ == o.neg_ && pos_ == o.pos_;
    }

  private:
    void validate_entries() const {
        for (double p : mass_)
            if (!(p >= 0.0) || !std::isfinite(p))
                throw std::invalid_argument("LatticeDist: negative or non-finite atom");
        if (!(neg_ >= 0.0) || !(pos_ >= 0.0))
            throw std::invalid_argument("LatticeDist: negative extended atom");
    }

    void trim() {
        while (mass_.size() > 1 && mass_.front() < kTrimThreshold) {
            mass_[1] += mass_[0];
            mass_.erase(mass_.begin());
            ++offset_;
        }
        while (mass_.size() > 1 && mass_.back() < kTrimThreshold) {
            mass_[mass_.size() - 2] += mass_.back();
            mass_.pop_back();
        }
        // A lone sub-threshold cell with extended mass present: fold it into
        // the heavier extended atom so the window can be empty.
        if (mass_.size() == 1 && mass_[0] < kTrimThreshold && (neg_ > 0.0 || pos_ > 0.0)) {
            (neg_ >= pos_ ? neg_ : pos_) += mass_[0];
            mass_.clear();
        }
        if (mass_.empty()) offset_ = 0;
    }

    void build_cdf() {
        cdf_.resize(mass_.size() + 1);
        double acc = neg_;
        cdf_[0] = acc;
        for (std::size_t i = 0; i < mass_.size(); ++i) {
            acc += mass_[i];
            cdf_[i + 1] = acc;
        }
    }

    void validate_total() const {
        double total = detail::compensated_sum(mass_) + neg_ + pos_;
        if (std::abs(total - 1.0) > kMassTolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "LatticeDist: total mass deviates from 1 by " << total - 1.0
               << " (tolerance " << kMassTolerance << ")";
            throw std::invalid_argument(os.str());
        }
    }

    long long offset_;
    std::vector<double> mass_;
    double neg_;
    double pos_;
    std::vector<double> cdf_;  // cdf_[i] = P(X < offset_ + i), i in [0, len]
};

/// d1 dominates d2 (d2 is stochastically below d1): P(d1 < k) <= P(d2 < k)
/// for every k. Checking the union of support windows extended by one site
/// suffices because both CDFs are constant outside.
inline bool dominates(const LatticeDist& d1, const LatticeDist& d2) {
    long long lo = 0, hi = 0;
    bool have = false;
    for (const LatticeDist* d : {&d1, &d2}) {
        if (d->finite_part_empty()) continue;
        lo = have ? std::min(lo, d->min_site()) : d->min_site();
        hi = have ? std::max(hi, d->max_site()) : d->max_site();
        have = true;
    }
    if (!have) { lo = 0; hi = 0; }
    for (long long k = lo - 1; k <= hi + 1; ++k)
        if (d1.cdf_at(k) > d2.cdf_at(k)) return false;
    return true;
}

/// P(X / n^{1/(m+1)} < x) read off the exact law: the strict inequality makes
/// the threshold the smallest integer k with k >= x * n^{1/(m+1)}.
inline double rescaled_cdf(const LatticeDist& d, long long n, double m, double x) {
    if (n < 1) throw std::invalid_argument("rescaled_cdf: n must be >= 1");
    double scale = std::pow(static_cast<double>(n), 1.0 / (m + 1.0));
    double threshold = std::ceil(x * scale);
    if (threshold < -9e18 || threshold > 9e18)
        return threshold < 0 ? d.cdf_at(d.finite_part_empty() ? 0 : d.min_site())
                             : d.cdf_at(d.finite_part_empty() ? 1 : d.max_site() + 1);
    return d.cdf_at(static_cast<long long>(threshold));
}

/// Max over grid of |f - g|. The grid must be non-empty.
template <typename F, typename G>
double sup_distance(F&& f, G&& g, std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("sup_distance: empty grid");
    double best = 0.0;
    for (double x : grid) best = std::max(best, std::abs(f(x) - g(x)));
    return best;
}

/// Text form: one `site probability` line per atom, with `-inf p` / `+inf p`
/// for the extended atoms. Blank lines and `#` comments are ignored.
inline std::string to_text(const LatticeDist& d);
inline LatticeDist parse_dist_text(const std::string& text);

inline std::string to_text(const LatticeDist& d) {
    std::ostringstream os;
    os.precision(17);
    if (d.mass_neg_inf() > 0.0) os << "-inf " << d.mass_neg_inf() << "\n";
    if (!d.finite_part_empty())
        for (long long k = d.min_site(); k <= d.max_site(); ++k)
            os << k << " " << d.pmf_at(k) << "\n";
    if (d.mass_pos_inf() > 0.0) os << "+inf " << d.mass_pos_inf() << "\n";
    return os.str();
}

inline LatticeDist parse_dist_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<std::pair<long long, double>> atoms;
    double neg = 0.0, pos = 0.0;
    while (std::getline(is, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        double p;
        if (!(ls >> key)) continue;
        if (!(ls >> p)) throw std::invalid_argument("distribution text: missing probability in '" + line + "'");
        if (key == "-inf")
            neg += p;
        else if (key == "+inf" || key == "inf")
            pos += p;
        else {
            std::size_t used = 0;
            long long site = std::stoll(key, &used);
            if (used != key.size())
                throw std::invalid_argument("distribution text: bad site '" + key + "'");
            atoms.emplace_back(site, p);
        }
    }
    if (atoms.empty()) return LatticeDist(0, {}, neg, pos);
    auto lo = std::min_element(atoms.begin(), atoms.end())->first;
    auto hi = std::max_element(atoms.begin(), atoms.end())->first;
    std::vector<double> mass(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (auto [site, p] : atoms) mass[static_cast<std::size_t>(site - lo)] += p;
    return LatticeDist(lo, std::move(mass), neg, pos);
}

}  // namespace coopmotion
