#pragma once

#include <string>
#include <vector>

#include "lbow/rng.hpp"
#include "lbow/tape.hpp"

namespace lbow {

void init_uniform(ad::Parameter* p, double range, Rng& rng);
void init_glorot(ad::Parameter* p, Rng& rng);

// Stacked unidirectional LSTM. With residual=true, layer j >= 2 receives
// the sum of layer j-1's input and output (requires input dim == hidden).
class LstmStack {
 public:
  void init(ad::ParameterStore& store, const std::string& prefix, int input_dim,
            int hidden, int layers, bool residual, Rng& rng);

  struct State {
    std::vector<ad::Var> h;
    std::vector<ad::Var> c;
  };

  State zero_state(ad::Tape& t) const;
  State step(ad::Tape& t, ad::Var x, const State& prev) const;

  int hidden() const { return hidden_; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return input_dim_; }

 private:
  struct Layer {
    ad::Parameter* w = nullptr;  // 4H x in
    ad::Parameter* u = nullptr;  // 4H x H
    ad::Parameter* b = nullptr;  // 4H x 1
  };
  std::vector<Layer> layers_;
  int hidden_ = 0;
  int input_dim_ = 0;
  bool residual_ = false;
};

}  // namespace lbow
