#pragma once

#include <string>
#include <vector>

#include "crl/numkit/autodiff.hpp"
#include "crl/numkit/rng.hpp"

namespace crl::nk {

// Adds `<name>.w` (in,out) and `<name>.b` (out) with scaled-uniform init.
void init_linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, RngStream& rng,
                 double gain = 1.0);
// Adds `<name>.g` (ones) and `<name>.b` (zeros).
void init_layer_norm(ParamSet& params, const std::string& name, std::size_t width);
void init_embedding(ParamSet& params, const std::string& name, std::size_t rows, std::size_t width, RngStream& rng,
                    double stddev = 1.0);

Var linear(Tape& tape, const ParamSet& params, const std::string& name, Var x);
Var layer_norm(Tape& tape, const ParamSet& params, const std::string& name, Var x, double eps = 1e-5);

// Sinusoidal features of a scalar per row: [sin(t·f_k), cos(t·f_k)] with
// geometric frequencies, width must be even.
Tensor sinusoidal_embedding(const std::vector<double>& t, std::size_t width, double max_period = 10000.0);

std::size_t parameter_count(const ParamSet& params);

}  // namespace crl::nk
