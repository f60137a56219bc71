#include <math.h>
#include <stdio.h>
#include "npmle.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    NpmleStatus s_ = (call);                                                 \
    if (s_ != NPMLE_STATUS_OK) {                                             \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,                \
              npmle_last_error_message());                                   \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  double xs[] = {-1.0, -0.8, 0.1, 1.9, 2.2, 2.4};
  NpmleSample *sample = NULL;
  NpmleSolution *sol = NULL;
  CHECK(npmle_sample_new(xs, 6, &sample));
  NpmleSolveOptions opts = npmle_solve_options_default();
  opts.kkt_tol = 1e-7;
  CHECK(npmle_fit(NPMLE_KERNEL_GAUSSIAN, sample, &opts, &sol));
  NpmleCertificate cert;
  CHECK(npmle_solution_certificate(sol, &cert));
  size_t k = npmle_solution_atom_count(sol);
  double atoms[16], weights[16];
  CHECK(npmle_solution_atoms(sol, atoms, weights, 16));
  double total = 0.0;
  for (size_t i = 0; i < k; i++) total += weights[i];
  if (!cert.converged || cert.gap_bound > 1e-7 || fabs(total - 1.0) > 1e-12) return 2;
  if (npmle_fit(42, sample, NULL, &sol) != NPMLE_STATUS_INVALID_ARGUMENT) return 3;
  printf("atoms=%zu gap=%g version=%s\n", k, cert.gap_bound, npmle_version());
  npmle_solution_free(sol);
  npmle_sample_free(sample);
  return 0;
}
