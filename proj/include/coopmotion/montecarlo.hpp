#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coopmotion/evolution.hpp"
#include "coopmotion/lattice_dist.hpp"
#include "coopmotion/model_params.hpp"
#include "coopmotion/step_law.hpp"

namespace coopmotion {

/// Walker position including the frozen states at +-infinity.
using Site = long long;
inline constexpr Site kNegInfSite = std::numeric_limits<long long>::min();
inline constexpr Site kPosInfSite = std::numeric_limits<long long>::max();

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stream i is a pure function of (seed, i): parallel and serial runs draw
/// identical numbers per trajectory.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1)));
}

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COOPMOTION_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return hw;
}

/// Inverse-CDF sampler over a LatticeDist, extended atoms included.
class DistSampler {
  public:
    explicit DistSampler(const LatticeDist& d)
        : offset_(d.offset()), neg_(d.mass_neg_inf()) {
        cum_.reserve(d.mass().size());
        double acc = neg_;
        for (double p : d.mass()) {
            acc += p;
            cum_.push_back(acc);
        }
        top_ = acc;  // 1 - mass_pos_inf up to rounding
    }

    Site draw(double u) const {
        if (u < neg_) return kNegInfSite;
        if (u >= top_) return kPosInfSite;
        auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        return offset_ + static_cast<long long>(it - cum_.begin());
    }

  private:
    long long offset_;
    double neg_;
    double top_;
    std::vector<double> cum_;
};

/// Inverse-CDF sampler over a StepLaw.
class StepSampler {
  public:
    explicit StepSampler(const StepLaw& law) {
        double acc = 0.0;
        for (auto [d, p] : law.atoms()) {
            acc += p;
            cum_.emplace_back(acc, d);
        }
    }

    long long draw(double u) const {
        for (auto [c, d] : cum_)
            if (u < c) return d;
        return cum_.back().second;
    }

  private:
    std::vector<std::pair<double, long long>> cum_;
};

}  // namespace detail

struct TrajectoryConfig {
    ModelParams params;
    StepLaw step;
    LatticeDist init;
    long long horizon;
    long long n_trajectories;
    std::uint64_t seed;

    TrajectoryConfig(const ModelParams& params_, const StepLaw& step_, LatticeDist init_,
                     long long horizon_, long long n_trajectories_, std::uint64_t seed_)
        : params(params_), step(step_), init(std::move(init_)), horizon(horizon_),
          n_trajectories(n_trajectories_), seed(seed_) {
        params.m_as_int();  // sampling requires integer m
        if (horizon < 0) throw std::invalid_argument("TrajectoryConfig: horizon must be >= 0");
        if (n_trajectories < 1)
            throw std::invalid_argument("TrajectoryConfig: need at least one trajectory");
    }
};

/// Exact marginal laws of X_0..X_horizon, for use as the friend laws.
inline std::vector<LatticeDist> exact_marginals(const TrajectoryConfig& cfg) {
    std::vector<LatticeDist> out;
    out.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
    out.push_back(cfg.init);
    for (long long k = 0; k < cfg.horizon; ++k)
        out.push_back(general_pmf_step(out.back(), cfg.step, cfg.params));
    return out;
}

/// One path x_0..x_horizon. At step k the m friends are drawn iid from the
/// exact law of X_k; on a full match the walker adds an independent step.
/// Paths at +-infinity stay there and consume no randomness.
inline std::vector<Site> sample_trajectory(const TrajectoryConfig& cfg,
                                           std::span<const LatticeDist> marginals,
                                           std::uint64_t trajectory_index = 0) {
    if (static_cast<long long>(marginals.size()) != cfg.horizon + 1)
        throw std::invalid_argument("sample_trajectory: need one marginal per step, 0..horizon");
    const int m = cfg.params.m_as_int();
    auto rng = detail::stream_for(cfg.seed, trajectory_index);
    detail::StepSampler step_sampler(cfg.step);

    std::vector<Site> path;
    path.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
    Site x = detail::DistSampler(marginals[0]).draw(detail::uniform01(rng));
    path.push_back(x);
    for (long long k = 0; k < cfg.horizon; ++k) {
        if (x != kNegInfSite && x != kPosInfSite) {
            detail::DistSampler friends(marginals[static_cast<std::size_t>(k)]);
            bool all_match = true;
            for (int i = 0; i < m; ++i)
                all_match &= friends.draw(detail::uniform01(rng)) == x;
            if (all_match) x += step_sampler.draw(detail::uniform01(rng));
        }
        path.push_back(x);
    }
    return path;
}

namespace detail {

struct EndpointCounts {
    std::map<long long, std::uint64_t> finite;
    std::uint64_t neg = 0, pos = 0;

    void merge(const EndpointCounts& o) {
        for (auto [k, c] : o.finite) finite[k] += c;
        neg += o.neg;
        pos += o.pos;
    }

    LatticeDist to_dist(long long total) const {
        double n = static_cast<double>(total);
        if (finite.empty())
            return LatticeDist(0, {}, static_cast<double>(neg) / n, static_cast<double>(pos) / n);
        long long lo = finite.begin()->first, hi = finite.rbegin()->first;
        std::vector<double> mass(static_cast<std::size_t>(hi - lo + 1), 0.0);
        for (auto [k, c] : finite)
            mass[static_cast<std::size_t>(k - lo)] = static_cast<double>(c) / n;
        return LatticeDist(lo, std::move(mass), static_cast<double>(neg) / n,
                           static_cast<double>(pos) / n);
    }
};

}  // namespace detail

/// Empirical endpoint distribution over cfg.n_trajectories independent paths.
/// Deterministic for a fixed seed regardless of thread count: streams are
/// per-trajectory and the merge is over integer counts.
inline LatticeDist sample_ensemble(const TrajectoryConfig& cfg) {
    const auto marginals = exact_marginals(cfg);
    const int m = cfg.params.m_as_int();

    std::vector<detail::DistSampler> samplers;
    samplers.reserve(marginals.size());
    for (const auto& d : marginals) samplers.emplace_back(d);
    detail::StepSampler step_sampler(cfg.step);

    auto run_range = [&](long long begin, long long end, detail::EndpointCounts& counts) {
        for (long long idx = begin; idx < end; ++idx) {
            auto rng = detail::stream_for(cfg.seed, static_cast<std::uint64_t>(idx));
            Site x = samplers[0].draw(detail::uniform01(rng));
            for (long long k = 0; k < cfg.horizon; ++k) {
                if (x == kNegInfSite || x == kPosInfSite) break;
                bool all_match = true;
                for (int i = 0; i < m; ++i)
                    all_match &=
                        samplers[static_cast<std::size_t>(k)].draw(detail::uniform01(rng)) == x;
                if (all_match) x += step_sampler.draw(detail::uniform01(rng));
            }
            if (x == kNegInfSite)
                ++counts.neg;
            else if (x == kPosInfSite)
                ++counts.pos;
            else
                ++counts.finite[x];
        }
    };

    unsigned workers = detail::worker_count();
    if (workers <= 1 || cfg.n_trajectories < 1024) {
        detail::EndpointCounts counts;
        run_range(0, cfg.n_trajectories, counts);
        return counts.to_dist(cfg.n_trajectories);
    }
    std::vector<detail::EndpointCounts> parts(workers);
    std::vector<std::thread> threads;
    long long chunk = (cfg.n_trajectories + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        long long b = static_cast<long long>(w) * chunk;
        long long e = std::min(cfg.n_trajectories, b + chunk);
        if (b >= e) break;
        threads.emplace_back(run_range, b, e, std::ref(parts[w]));
    }
    for (auto& t : threads) t.join();
    detail::EndpointCounts total;
    for (const auto& p : parts) total.merge(p);
    return total.to_dist(cfg.n_trajectories);
}

/// Mean-field approximation: n_particles walkers whose friends are drawn
/// uniformly with replacement from the current ensemble snapshot instead of
/// the exact law. An approximation to the cooperative-motion law, offered
/// for scale experiments; no convergence rate is claimed.
inline LatticeDist sample_particle_system(const TrajectoryConfig& cfg, long long n_particles) {
    const int m = cfg.params.m_as_int();
    if (n_particles < m + 1)
        throw std::invalid_argument("sample_particle_system: need at least m+1 particles");

    auto rng = detail::stream_for(cfg.seed, 0xC0FFEEULL);
    detail::DistSampler init_sampler(cfg.init);
    detail::StepSampler step_sampler(cfg.step);

    std::vector<Site> particles(static_cast<std::size_t>(n_particles));
    for (auto& x : particles) x = init_sampler.draw(detail::uniform01(rng));

    std::vector<Site> snapshot(particles.size());
    for (long long k = 0; k < cfg.horizon; ++k) {
        snapshot = particles;
        for (auto& x : particles) {
            if (x == kNegInfSite || x == kPosInfSite) continue;
            bool all_match = true;
            for (int i = 0; i < m; ++i) {
                auto j = static_cast<std::size_t>(rng() % snapshot.size());
                all_match &= snapshot[j] == x;
            }
            if (all_match) x += step_sampler.draw(detail::uniform01(rng));
        }
    }

    detail::EndpointCounts counts;
    for (Site x : particles) {
        if (x == kNegInfSite)
            ++counts.neg;
        else if (x == kPosInfSite)
            ++counts.pos;
        else
            ++counts.finite[x];
    }
    return counts.to_dist(n_particles);
}

/// 99.9%-confidence DKW band half-width for an empirical CDF over n samples.
inline double dkw_bound(long long n_samples, double delta = 0.001) {
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n_samples)));
}

/// Sup distance between the CDFs of two lattice distributions over the union
/// of their windows.
inline double sup_cdf_distance(const LatticeDist& a, const LatticeDist& b) {
    long long lo = 0, hi = 0;
    bool have = false;
    for (const LatticeDist* d : {&a, &b}) {
        if (d->finite_part_empty()) continue;
        lo = have ? std::min(lo, d->min_site()) : d->min_site();
        hi = have ? std::max(hi, d->max_site()) : d->max_site();
        have = true;
    }
    double best = 0.0;
    for (long long k = lo - 1; k <= hi + 1; ++k)
        best = std::max(best, std::abs(a.cdf_at(k) - b.cdf_at(k)));
    return best;
}

}  // namespace coopmotion
