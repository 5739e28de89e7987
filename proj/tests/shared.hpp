#ifndef PKATLAS_TESTS_SHARED_HPP
#define PKATLAS_TESTS_SHARED_HPP

// Analyses shared by several test files; each is built once per process.

#include "pkatlas/atlas.hpp"
#include "pkatlas/fixtures.hpp"

namespace shared {

inline const pkatlas::Analysis& depth6() {
  static const pkatlas::Analysis a = pkatlas::analyze(pkatlas::default_geometry(), 6, 6);
  return a;
}

inline const pkatlas::Analysis& depth4() {
  static const pkatlas::Analysis a = pkatlas::analyze(pkatlas::default_geometry(), 4, 4);
  return a;
}

inline const pkatlas::Fixture& fixture6() {
  static const pkatlas::Fixture f = pkatlas::find_fixture(depth6().workspace, depth6().joint, 1);
  return f;
}

}  // namespace shared

#endif  // PKATLAS_TESTS_SHARED_HPP
