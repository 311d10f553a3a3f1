#include <algorithm>
#include <thread>

#include "stabsched/stability/stability.hpp"
#include "stabsched/surrogate/surrogate.hpp"
#include "stabsched/util/random.hpp"

namespace stabsched {

std::vector<std::string> cut_feature_names(const CaseData& c) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c.n_gen(); ++i) names.push_back("u_g" + std::to_string(i + 1));
  for (const IbrUnit& u : c.ibr_units) names.push_back("p_r" + std::to_string(u.bus));
  return names;
}

std::vector<StabilitySample> generate_dataset(const CaseData& c, std::size_t n_samples,
                                              std::uint64_t seed, unsigned workers) {
  if (n_samples == 0) throw std::invalid_argument("dataset needs at least one sample");
  if (c.n_gen() >= 31) throw std::invalid_argument("too many generators to enumerate");
  const std::size_t ng = c.n_gen();
  const std::size_t nr = c.n_ibr();
  const std::size_t patterns = std::size_t{1} << ng;
  const Matrix b0 = build_b0(c);
  const std::vector<std::size_t> ibr = ibr_bus_indices(c);
  const Vector v(nr, 1.0);

  // Reductions depend on the pattern only.
  std::vector<std::optional<Matrix>> reduced(patterns);
  for (std::size_t k = 0; k < patterns; ++k) {
    Vector u(ng);
    for (std::size_t i = 0; i < ng; ++i) u[i] = (k >> i) & 1u;
    if (k == 0) continue;
    try {
      reduced[k] = kron_reduce_to_ibr(augment_admittance(b0, u, c.generators), ibr);
    } catch (const GroundingError&) {
    }
  }

  std::vector<StabilitySample> out(n_samples);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t k = s % patterns;
      Rng rng(derive_seed(seed, s));
      StabilitySample& smp = out[s];
      smp.x.resize(ng + nr);
      for (std::size_t i = 0; i < ng; ++i) smp.x[i] = (k >> i) & 1u;
      Vector p(nr);
      for (std::size_t r = 0; r < nr; ++r) {
        p[r] = rng.uniform(0.0, c.ibr_units[r].p_capacity);
        smp.x[ng + r] = p[r];
      }
      if (!reduced[k]) {
        smp.gscr = 0.0;
        smp.y = 1;
        continue;
      }
      smp.gscr = compute_gscr(v, p, *reduced[k], c.freq_params.gscr_lim).gscr;
      smp.y = smp.gscr < c.freq_params.gscr_lim + 1e-9 ? 1 : 0;
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_samples)));
  if (workers == 1) {
    fill(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_samples + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n_samples, lo + chunk);
      if (lo < hi) pool.emplace_back(fill, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace stabsched
