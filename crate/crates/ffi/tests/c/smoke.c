#include <math.h>
#include <stdio.h>
#include "iontrap.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    IontrapStatus s_ = (call);                                               \
    if (s_ != IONTRAP_STATUS_OK) {                                           \
      char msg_[256];                                                        \
      iontrap_last_error(msg_, sizeof msg_, NULL);                           \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, msg_);         \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  IontrapTrapParams p;
  CHECK(iontrap_trap_params_default(IONTRAP_TIER_DESK, &p));
  IontrapBasis *basis = NULL;
  CHECK(iontrap_basis_solve(&p, &basis));
  size_t d = 0;
  CHECK(iontrap_basis_dim(basis, &d));
  double e[64];
  CHECK(iontrap_basis_energies(basis, e, 64));
  double tau = 0.0;
  CHECK(iontrap_heating_time(basis, 5e-18, &tau));

  double zero[11] = {0};
  IontrapField *field = NULL;
  CHECK(iontrap_field_new(zero, 11, 10.0, &field));
  IontrapGate *u = NULL;
  CHECK(iontrap_evolution_operator(field, basis, p.computational_size, &u));
  double f = 0.0;
  CHECK(iontrap_gate_fidelity(u, u, &f));

  if (iontrap_basis_solve(NULL, &basis) != IONTRAP_STATUS_NULL_POINTER) return 2;

  printf("d=%zu e1-e0=%.6e tau=%.6e f=%.12f\n", d, e[1] - e[0], tau, f);
  iontrap_gate_free(u);
  iontrap_field_free(field);
  iontrap_basis_free(basis);
  return (d == p.dynamical_size && fabs(f - 1.0) < 1e-12 && tau > 0.0) ? 0 : 3;
}
