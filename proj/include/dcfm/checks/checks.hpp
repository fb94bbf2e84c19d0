// Verification suites shared by the acceptance binary and `dcfm selftest`.
// Each suite compares the library against the loop oracles or checks an
// algebraic identity, and reports a one-line verdict.

#pragma once

#include <cstdint>
#include <string>

namespace dcfm::checks {

struct CheckResult {
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Seed indices and vectors against the brute-force oracle on random
// groups (N <= 4, C <= 8, H*W <= 16); exact equality.
CheckResult seed_selection_oracle(std::size_t instances, std::uint64_t seed);

// Response maps and prototypes against the loop oracle within `tol`, and
// every map value inside [-1, 1].
CheckResult response_prototype_oracle(std::size_t instances, std::uint64_t seed, double tol = 1e-12);

// Central differences (h = 1e-4) of the total loss with respect to every
// parameter and input pixel of a tiny model (N = 2, C = 4, 8x8 images),
// with seeds, ranks and signs frozen.
CheckResult total_loss_gradient(std::uint64_t seed, double tol = 1e-4);

// All-ones masks reproduce the plain prototype bitwise and the perfect
// positive term; complementary masks swap the pair exactly.
CheckResult scl_identities(std::uint64_t seed);

// Weight rules of the readjustment on random rows with alpha = 3 and the
// two-entry worked example.
CheckResult readjustment_properties(std::size_t rows, std::uint64_t seed);

// MAE and F-measure against per-threshold loop oracles, plus the
// pred == gt identity.
CheckResult metrics_oracle(std::size_t pairs, std::uint64_t seed, double tol = 1e-12);

}  // namespace dcfm::checks
