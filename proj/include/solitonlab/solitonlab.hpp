#pragma once

// Phase-space simulator for Gaussian states on a nonlinear photonic lattice:
// affine-symplectic circuits, closed-form observables, Adam training of a
// squeeze-displace-mix ansatz, negativity and photon-pattern analysis, and a
// truncated Fock-space oracle that cross-checks all of it.

#include "solitonlab/ansatz.hpp"
#include "solitonlab/entanglement.hpp"
#include "solitonlab/experiment.hpp"
#include "solitonlab/fock_oracle.hpp"
#include "solitonlab/gates.hpp"
#include "solitonlab/observables.hpp"
#include "solitonlab/phase_space.hpp"
#include "solitonlab/sampling.hpp"
#include "solitonlab/solver.hpp"
