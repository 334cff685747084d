#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "onepath/audit.hpp"
#include "onepath/entities.hpp"
#include "onepath/synth.hpp"

namespace onepath {

struct SelftestCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct SelftestResult {
  std::vector<SelftestCheck> checks;
  std::string transcript_jsonl;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    return !checks.empty();
  }
};

struct SelftestOptions {
  std::size_t trees = 8;
  unsigned max_depth = 6;
  std::size_t inputs_per_tree = 2;
};

namespace detail {

inline void run_check(SelftestResult& res, const std::string& name, const std::function<std::string()>& fn) {
  try {
    res.checks.push_back({name, true, fn()});
  } catch (const std::exception& e) {
    res.checks.push_back({name, false, e.what()});
  }
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

}  // namespace detail

// Invariant suite behind `onepath selftest`. Every check catches its own
// failure so one broken invariant does not hide the others.
inline SelftestResult run_selftest(const KeyMaterial& keys, Rng rng, const SelftestOptions& opt = {}) {
  using detail::require;
  SelftestResult res;
  const ProtocolParams& params = keys.params;
  const RingParams ring = params.ring();
  const auto& mpk = keys.ipfe.mpk;
  const auto table = shared_dlog_table(keys.group(), params.dlog_window());

  detail::run_check(res, "IPFE (1,2).(3,4) = 11", [&] {
    Rng r = rng.derive("fe-vector");
    const auto ct = ipfe_encrypt(mpk, {1, 2}, r);
    const auto v = ipfe_decrypt(mpk, ct, ipfe_keyder(keys.ipfe.msk, keys.group(), {3, 4}), *table);
    require(v == 11, "decrypted " + std::to_string(v));
    return std::string("ok");
  });

  detail::run_check(res, "IPFE random round trips", [&] {
    Rng r = rng.derive("fe-random");
    for (int i = 0; i < 20; ++i) {
      const std::int64_t a = r.uniform_int(-params.a_max(), params.a_max());
      const std::int64_t b = r.uniform_int(-params.b_max(), params.b_max());
      const std::uint64_t y1 = r.uniform(ring.modulus()), y2 = r.uniform(ring.modulus());
      const auto got = ipfe_decrypt(mpk, ipfe_encrypt(mpk, {a, b}, r),
                                    ipfe_keyder(keys.ipfe.msk, keys.group(), {y1, y2}), *table);
      const std::int64_t want = a * static_cast<std::int64_t>(y1) + b * static_cast<std::int64_t>(y2);
      require(got == want, "inner product " + std::to_string(got) + " != " + std::to_string(want));
    }
    return std::string("20 pairs");
  });

  detail::run_check(res, "share reconstruction", [&] {
    Rng r = rng.derive("shares");
    for (int i = 0; i < 2000; ++i) {
      const std::uint64_t v = r.uniform(ring.modulus());
      auto [s1, s2] = split(ring, v, r);
      require(reconstruct(ring, s1, s2) == v, "split/reconstruct mismatch");
    }
    return std::string("2000 values");
  });

  detail::run_check(res, "mask cancellation", [&] {
    Rng r = rng.derive("mask");
    const std::uint32_t gamma = 15;
    const auto seed = PrfSeed::sample(gamma, r);
    const std::size_t n = 9;
    const auto x = random_input(n, params.feature_bits, r);
    std::vector<std::uint64_t> xr(x.begin(), x.end());
    for (std::uint32_t j = 1; j <= gamma; ++j) {
      const std::size_t f = r.uniform(n);
      auto masked = prf_eval(seed, j, n, ring.bits());
      masked[f] = ring.add(masked[f], 1);
      auto neg = prf_eval(seed, j, n, ring.bits());
      for (auto& m : neg) m = ring.neg(m);
      require(ring.add(dot_mod(ring, masked, xr), dot_mod(ring, neg, xr)) == x[f], "mask did not cancel");
    }
    return std::string("15 indexes");
  });

  detail::run_check(res, "linear encoding brute force", [&] {
    Rng r = rng.derive("linear");
    for (std::uint32_t th = 0; th < params.feature_limit(); ++th) {
      const auto lc = encode_linear(th, r);
      require(lc.slope == 2 * lc.slope_draw && lc.slope_draw >= 1 && lc.slope_draw <= 99, "slope out of range");
      for (std::uint32_t x = 0; x < params.feature_limit(); ++x)
        require((lc.evaluate(x) > 1) == (x > th), "decision rule broken at x=" + std::to_string(x));
    }
    return std::to_string(params.feature_limit()) + "^2 cases";
  });

  std::ostringstream jsonl;
  detail::run_check(res, "oracle equivalence and leakage audit", [&] {
    Rng r = rng.derive("trees");
    std::size_t runs = 0;
    for (std::size_t t = 0; t < opt.trees; ++t) {
      const unsigned d = 1 + static_cast<unsigned>(t % opt.max_depth);
      const std::size_t n = 2 + r.uniform(12);
      const CompleteTree tree = random_complete_tree(d, n, params.feature_bits, r);
      DeploymentOptions dopt;
      dopt.transport.zero_timestamps = env_seed().has_value();
      Deployment dep(keys, r.derive("deployment"), dopt);
      dep.provision(tree);
      for (std::size_t i = 0; i < opt.inputs_per_tree; ++i) {
        const auto x = i % 2 ? boundary_input(tree, params.feature_bits, r) : random_input(n, params.feature_bits, r);
        const auto out = dep.infer(x);
        const auto audit = leakage_audit(dep, out.session, tree, x);
        if (!audit.passed()) {
          std::string why;
          for (const auto& v : audit.violations()) why += v + "; ";
          throw Error("tree " + std::to_string(t) + " (d=" + std::to_string(d) + "): " + why);
        }
        ++runs;
      }
      dep.transcript().export_jsonl(jsonl);
    }
    return std::to_string(runs) + " encrypted queries";
  });
  res.transcript_jsonl = jsonl.str();
  return res;
}

}  // namespace onepath
