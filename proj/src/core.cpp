#include "chernoff/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace chernoff {

MeansTable::MeansTable(std::size_t arms, std::size_t hyps, std::vector<double> row_major)
    : arms_(arms), hyps_(hyps), data_(std::move(row_major)) {
  if (arms_ < 1) throw InvalidArgument("MeansTable: need at least one arm");
  if (hyps_ < 2) throw InvalidArgument("MeansTable: need at least two hypotheses");
  if (data_.size() != arms_ * hyps_) {
    throw InvalidArgument("MeansTable: data size does not match arms x hyps");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InvalidArgument("MeansTable: non-finite entry");
  }
}

MeansTable MeansTable::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidArgument("MeansTable: no rows");
  const std::size_t hyps = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * hyps);
  for (const auto& r : rows) {
    if (r.size() != hyps) throw InvalidArgument("MeansTable: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return MeansTable(rows.size(), hyps, std::move(flat));
}

std::vector<std::vector<double>> MeansTable::rows() const {
  std::vector<std::vector<double>> out(arms_);
  for (std::size_t i = 0; i < arms_; ++i) {
    auto r = row(i);
    out[i].assign(r.begin(), r.end());
  }
  return out;
}

NoiseSpec NoiseSpec::gaussian(double stddev) {
  return gaussian_with_eta(stddev, 16.0 * stddev * stddev);
}

NoiseSpec NoiseSpec::gaussian_with_eta(double stddev, double eta) {
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) throw InvalidArgument("noise std must be >= 0");
  NoiseSpec s;
  s.kind = NoiseKind::gaussian;
  s.scale = stddev;
  // A zero-noise environment still needs a positive range parameter.
  s.eta = eta > 0.0 ? eta : 1.0;
  s.eta_is_proxy = true;
  return s;
}

NoiseSpec NoiseSpec::bounded_uniform(double half_width, double eta) {
  if (!(half_width >= 0.0)) throw InvalidArgument("uniform half width must be >= 0");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be > 0");
  NoiseSpec s;
  s.kind = NoiseKind::bounded_uniform;
  s.scale = half_width;
  s.eta = eta;
  s.eta_is_proxy = false;
  return s;
}

NoiseSpec NoiseSpec::truncated_gaussian(double stddev, double half_range, double eta) {
  if (!(stddev >= 0.0)) throw InvalidArgument("noise std must be >= 0");
  if (!(half_range > 0.0)) throw InvalidArgument("truncation half range must be > 0");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be > 0");
  NoiseSpec s;
  s.kind = NoiseKind::truncated_gaussian;
  s.scale = stddev;
  s.half_range = half_range;
  s.eta = eta;
  s.eta_is_proxy = false;
  return s;
}

double NoiseSpec::variance() const {
  switch (kind) {
    case NoiseKind::gaussian:
      return scale * scale;
    case NoiseKind::bounded_uniform:
      return scale * scale / 3.0;
    case NoiseKind::truncated_gaussian: {
      // Variance of N(0, s^2) truncated to [-a, a].
      if (scale == 0.0) return 0.0;
      const double a = half_range / scale;
      const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
      const double mass = std::erf(a / std::sqrt(2.0));
      return scale * scale * (1.0 - 2.0 * a * pdf / mass);
    }
  }
  return 0.0;
}

double NoiseSpec::reward_bound() const { return std::sqrt(eta) / 2.0; }

Design Design::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("Design: empty");
  Design d;
  d.probs.assign(n, 1.0 / static_cast<double>(n));
  return d;
}

Design Design::point(std::size_t n, ArmIndex arm) {
  if (arm >= n) throw InvalidArgument("Design: arm out of range");
  Design d;
  d.probs.assign(n, 0.0);
  d.probs[arm] = 1.0;
  return d;
}

std::size_t Design::support_size() const {
  return static_cast<std::size_t>(
      std::count_if(probs.begin(), probs.end(), [&](double p) { return p > support_eps; }));
}

std::vector<ArmIndex> Design::support() const {
  std::vector<ArmIndex> s;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > support_eps) s.push_back(i);
  }
  return s;
}

void Design::validate() const {
  if (probs.empty()) throw InvalidArgument("Design: empty");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("Design: negative or non-finite weight");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "Design: weights sum to " << total;
    throw InvalidArgument(msg.str());
  }
}

ArmIndex Design::sample(Rng& rng) const {
  const double u = uniform01(rng);
  double acc = 0.0;
  ArmIndex last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

double uniform01(Rng& rng) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  // Marsaglia polar method; fixed consumption pattern keeps streams portable.
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: empty range");
  if (n == 1) return 0;
  // Lemire-style rejection for an unbiased index.
  const std::uint64_t bound = n;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return static_cast<std::size_t>(x % bound);
  }
}

double draw_observation(double mean, const NoiseSpec& noise, Rng& rng) {
  switch (noise.kind) {
    case NoiseKind::gaussian:
      if (noise.scale == 0.0) return mean;
      return mean + noise.scale * standard_normal(rng);
    case NoiseKind::bounded_uniform: {
      const double y = mean + noise.scale * (2.0 * uniform01(rng) - 1.0);
      const double b = noise.reward_bound();
      return std::clamp(y, -b, b);
    }
    case NoiseKind::truncated_gaussian: {
      double z = 0.0;
      if (noise.scale > 0.0) {
        do {
          z = noise.scale * standard_normal(rng);
        } while (std::abs(z) > noise.half_range);
      }
      const double b = noise.reward_bound();
      return std::clamp(mean + z, -b, b);
    }
  }
  return mean;
}

double draw_reward(const MeansTable& means, HypIndex true_hyp, ArmIndex arm,
                   const NoiseSpec& noise, Rng& rng) {
  if (arm >= means.arm_count()) throw InvalidArgument("draw_reward: arm out of range");
  if (true_hyp >= means.hyp_count()) throw InvalidArgument("draw_reward: hypothesis out of range");
  return draw_observation(means(arm, true_hyp), noise, rng);
}

void update_losses(TrialHistory& hist, const MeansTable& means, ArmIndex arm, double obs) {
  if (arm >= means.arm_count()) throw InvalidArgument("update_losses: arm out of range");
  if (hist.cum_sq_err.size() != means.hyp_count()) {
    throw InvalidArgument("update_losses: history has wrong hypothesis count");
  }
  hist.arms.push_back(arm);
  hist.obs.push_back(obs);
  const auto row = means.row(arm);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double r = obs - row[j];
    hist.cum_sq_err[j] += r * r;
  }
}

namespace {

// Index of the k-th entry (0-based) of `losses` equal to `value`, skipping `skip`.
std::size_t kth_equal(std::span<const double> losses, double value, std::size_t k,
                      std::size_t skip) {
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (j == skip || losses[j] != value) continue;
    if (k == 0) return j;
    --k;
  }
  return skip;
}

}  // namespace

std::pair<HypIndex, HypIndex> most_likely(std::span<const double> losses, Rng& rng) {
  const std::size_t m = losses.size();
  if (m < 2) throw InvalidArgument("most_likely: need at least two hypotheses");
  constexpr std::size_t none = static_cast<std::size_t>(-1);

  double best = losses[0];
  std::size_t n_best = 1;
  std::size_t first_best = 0;
  for (std::size_t j = 1; j < m; ++j) {
    if (losses[j] < best) {
      best = losses[j];
      n_best = 1;
      first_best = j;
    } else if (losses[j] == best) {
      ++n_best;
    }
  }
  if (n_best >= 2) {
    const std::size_t a = uniform_index(rng, n_best);
    std::size_t b = uniform_index(rng, n_best - 1);
    if (b >= a) ++b;
    return {kth_equal(losses, best, a, none), kth_equal(losses, best, b, none)};
  }
  const HypIndex leader = first_best;

  double second = 0.0;
  std::size_t n_second = 0;
  std::size_t first_second = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (j == leader) continue;
    if (n_second == 0 || losses[j] < second) {
      second = losses[j];
      n_second = 1;
      first_second = j;
    } else if (losses[j] == second) {
      ++n_second;
    }
  }
  if (n_second == 1) return {leader, first_second};
  return {leader, kth_equal(losses, second, uniform_index(rng, n_second), leader)};
}

std::pair<HypIndex, HypIndex> most_likely(const TrialHistory& hist, Rng& rng) {
  if (hist.round() == 0) throw InvalidArgument("most_likely: empty history");
  return most_likely(std::span<const double>(hist.cum_sq_err), rng);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  // FNV-1a over the label, then mix with master and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ splitmix64(h)) + index);
}

}  // namespace chernoff
