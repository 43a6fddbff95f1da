#pragma once

#include <span>
#include <vector>

#include "fedad/models.hpp"

namespace fedad::detail {

// Layout builders: append the sub-networks and blocks of each kind.
void layout_autoencoder(ModelState& s);  // DAE and MemAE
void layout_dsebm(ModelState& s);
void layout_svdd(ModelState& s);
void layout_neutralad(ModelState& s);

Objective dae_objective(const ModelState& s, const Matrix& x);
std::vector<double> dae_scores(const ModelState& s, const Matrix& x);

Objective memae_objective(const ModelState& s, const Matrix& x);
std::vector<double> memae_scores(const ModelState& s, const Matrix& x);

Objective dsebm_objective(const ModelState& s, const Matrix& x);

Objective svdd_objective(const ModelState& s, const Matrix& x);
std::vector<double> svdd_scores(const ModelState& s, const Matrix& x);

Objective neutralad_objective(const ModelState& s, const Matrix& x);
std::vector<double> neutralad_scores(const ModelState& s, const Matrix& x);

// Appends a sub-network at the end of the current parameter layout.
void add_net(ModelState& s, std::string name, MlpSpec spec);
void add_block(ModelState& s, std::string name, std::size_t rows, std::size_t cols);
std::size_t layout_size(const ModelState& s);

// Per-row mean of squared differences.
std::vector<double> row_mse(const Matrix& a, const Matrix& b);

}  // namespace fedad::detail
