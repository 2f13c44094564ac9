// core/include/spex/nn/lstm.h

// Copyright 2026 SpEx Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEX_NN_LSTM_H_
#define SPEX_NN_LSTM_H_

#include "spex/nn/tensor.h"

namespace spex::nn {

/// One LSTM direction. Gate rows are ordered input, forget, cell, output.
struct LstmWeights {
  Var input;      // (4H x F x 1)
  Var recurrent;  // (4H x H x 1)
  Var bias;       // (1 x 4H x 1)

  std::size_t hidden() const { return recurrent.shape().channels; }
};

/// Bidirectional LSTM over x (B x F x T). Output is (B x 2H x T): forward
/// states in channels [0, H), backward states in [H, 2H).
Var BiLstm(const Var &x, const LstmWeights &forward, const LstmWeights &backward);

}  // namespace spex::nn

#endif  // SPEX_NN_LSTM_H_
