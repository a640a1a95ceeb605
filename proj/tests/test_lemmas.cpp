// Randomized property checks of the matrix inequalities the training analysis
// relies on, at least 1000 instances each.

#include <gtest/gtest.h>

#include "property_suites.hpp"

using namespace ntks::testing;

namespace {

constexpr int kInstances = 1000;

void expect_clean(const SuiteResult& r) {
  EXPECT_GE(r.instances, kInstances) << r.name;
  EXPECT_EQ(r.violations, 0) << r.name << ": " << r.first_violation;
}

}  // namespace

TEST(Lemmas, EarlyStoppingValueBounds) { expect_clean(early_stopping_suite(kInstances)); }

TEST(Lemmas, HadamardProductEigenvalues) { expect_clean(hadamard_suite(kInstances)); }

TEST(Lemmas, AsymmetricPsdIncrease) { expect_clean(asymmetric_increase_suite(kInstances)); }

TEST(Lemmas, PsdSquareRootPerturbation) { expect_clean(psd_sqrt_suite(kInstances)); }

TEST(Lemmas, JacobianSpectralBound) { expect_clean(jacobian_spectral_suite(kInstances)); }

TEST(Lemmas, JacobianRowBound) { expect_clean(jacobian_row_suite(kInstances)); }

TEST(Lemmas, JacobianLipschitz) { expect_clean(jacobian_lipschitz_suite(kInstances)); }

TEST(Lemmas, InitialOutputBoundHoldsInAtLeast99Percent) {
  const SuiteResult r = initial_output_suite(400);
  EXPECT_GE(r.instances, kInstances);
  EXPECT_LE(100 * r.violations, r.instances) << r.first_violation;
}
