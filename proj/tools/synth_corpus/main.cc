// tools/synth_corpus/main.cc

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

#include <iostream>

#include <CLI11.hpp>

#include "spex/corpus_synth.h"
#include "spex/error.h"

int main(int argc, char **argv) {
  CLI::App app{"Write a synthetic multi-speaker corpus of speech-like WAVs", "synth_corpus"};
  spex::SynthCorpusOptions opts;
  std::string out;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--speakers", opts.num_speakers, "Number of speakers");
  app.add_option("--utterances", opts.utterances_per_speaker, "Utterances per speaker");
  app.add_option("--min-seconds", opts.min_seconds, "Shortest utterance");
  app.add_option("--max-seconds", opts.max_seconds, "Longest utterance");
  app.add_option("--seed", opts.seed, "Random seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const spex::Corpus corpus = spex::WriteSynthCorpus(opts, out);
    std::cout << "wrote " << corpus.size() << " speakers to " << out << "\n";
  } catch (const spex::Error &e) {
    std::cerr << "synth_corpus: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
