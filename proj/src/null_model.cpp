#include "layersim/null_model.hpp"

#include "layersim/error.hpp"
#include "layersim/parallel.hpp"
#include "layersim/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace layersim {
namespace {

constexpr double kLn10 = std::numbers::ln10;
// Beyond this z, 0.5*erfc(z/sqrt 2) approaches the subnormal range.
constexpr double kDirectTailLimit = 35.0;

double log_phi(double z) { return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi); }

// ln Q(z) for large z: ln(phi(z)/z) + ln(1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8).
double log_upper_tail_asymptotic(double z) {
  const double w = 1.0 / (z * z);
  const double series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)));
  return log_phi(z) - std::log(z) + std::log(series);
}

// Floyd's algorithm: marks a uniform k-subset of [0, population) with `stamp`.
void draw_subset(CounterRng& rng, std::uint32_t k, std::uint32_t population,
                 std::vector<std::uint32_t>& marks, std::uint32_t stamp,
                 std::vector<std::uint32_t>& members) {
  members.clear();
  for (std::uint32_t j = population - k; j < population; ++j) {
    const auto t = static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(j) + 1));
    const std::uint32_t pick = marks[t] == stamp ? j : t;
    marks[pick] = stamp;
    members.push_back(pick);
  }
}

void check_range(std::uint32_t k, std::uint32_t n) {
  if (n < 3) throw Error(ErrorCode::OutOfRange, "null model needs n >= 3, got " + std::to_string(n));
  if (k < 1 || k > n - 1)
    throw Error(ErrorCode::OutOfRange,
                "null model needs 1 <= k <= n-1, got k=" + std::to_string(k) + " n=" + std::to_string(n));
}

} // namespace

NullModel null_parameters(std::uint32_t k, std::uint32_t n) {
  check_range(k, n);
  const double kd = k, nd = n;
  const double gap = kd - nd + 1.0;
  NullModel m{k, n, kd / (nd - 1.0), std::sqrt(gap * gap / (nd * (nd - 2.0) * (nd - 1.0) * (nd - 1.0)))};
  return m;
}

NullTail null_tail(const NullModel& model, double threshold) {
  NullTail tail;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (model.sd == 0.0) {
    tail.z = threshold <= model.mean ? -std::numeric_limits<double>::infinity()
                                     : std::numeric_limits<double>::infinity();
    tail.log10_p = threshold <= model.mean ? 0.0 : -std::numeric_limits<double>::infinity();
    tail.log10_lower = tail.log10_upper = nan;
    return tail;
  }
  const double z = (threshold - model.mean) / model.sd;
  tail.z = z;
  if (z > 0.0) {
    tail.log10_lower = (log_phi(z) + std::log(z / (z * z + 1.0))) / kLn10;
    tail.log10_upper = (log_phi(z) - std::log(z)) / kLn10;
  } else {
    tail.log10_lower = tail.log10_upper = nan;
  }
  if (z <= kDirectTailLimit)
    tail.log10_p = std::log10(0.5 * std::erfc(z / std::numbers::sqrt2));
  else
    tail.log10_p = log_upper_tail_asymptotic(z) / kLn10;
  return tail;
}

MonteCarloNull monte_carlo_null(std::uint32_t k, std::uint32_t n, std::uint64_t trials,
                                std::uint64_t seed, unsigned threads) {
  check_range(k, n);
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "monte_carlo_null needs at least one trial");
  std::vector<double> scores(trials);
  const std::uint32_t population = n - 1;
  parallel_for(trials, threads, [&](std::size_t t) {
    CounterRng rng(seed, t);
    std::vector<std::uint32_t> marks_f(population, 0), marks_g(population, 0), members_f, members_g;
    std::uint64_t shared = 0;
    for (std::uint32_t x = 0; x < n; ++x) {
      const std::uint32_t stamp = x + 1;
      draw_subset(rng, k, population, marks_f, stamp, members_f);
      draw_subset(rng, k, population, marks_g, stamp, members_g);
      for (auto y : members_g)
        if (marks_f[y] == stamp) ++shared;
    }
    scores[t] = static_cast<double>(shared) / (static_cast<double>(k) * static_cast<double>(n));
  });
  MonteCarloNull mc;
  mc.trials = trials;
  for (double s : scores) mc.mean += s;
  mc.mean /= static_cast<double>(trials);
  if (trials > 1) {
    double ss = 0.0;
    for (double s : scores) ss += (s - mc.mean) * (s - mc.mean);
    mc.sd = std::sqrt(ss / static_cast<double>(trials - 1));
  }
  return mc;
}

} // namespace layersim
