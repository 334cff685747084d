#pragma once

#include <gtest/gtest.h>

#include "onepath/onepath.hpp"

namespace onepath::testing {

// Default parameters (128-bit group, l = 16, t = 7).
inline const KeyMaterial& default_keys() {
  static const KeyMaterial km = [] {
    Rng r = Rng::from_seed("test-keys/default");
    return KeyMaterial::generate(ProtocolParams{}, r);
  }();
  return km;
}

// 112-bit group with l = 12, t = 3: a window small enough for many cheap
// sessions.
inline ProtocolParams small_params() { return ProtocolParams{112, 12, 3}; }

inline const KeyMaterial& small_keys() {
  static const KeyMaterial km = [] {
    Rng r = Rng::from_seed("test-keys/small");
    return KeyMaterial::generate(small_params(), r);
  }();
  return km;
}

inline DeploymentOptions small_options() {
  DeploymentOptions o;
  o.baby_steps = std::uint64_t{1} << 14;
  return o;
}

inline PlainNode leaf(std::string label) { return PlainNode{true, 0, 0.0, std::move(label), -1, -1}; }
inline PlainNode split_node(std::uint32_t f, double th, int l, int r) { return PlainNode{false, f, th, {}, l, r}; }

}  // namespace onepath::testing
