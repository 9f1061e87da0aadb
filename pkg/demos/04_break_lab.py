#!/usr/bin/env python3
"""Reproduce the embedding-failure scenarios on the bundled synthetic table.

Each scenario plants a synthetic text column whose relationship to the
label is easy for some embedders and hostile to others:

  complete_leak       the label itself appears in the text (ceiling: 100)
  synonym_ood         test rows use synonyms never seen in training,
                      which zeroes out tf-idf but not word vectors
  noise_dilution      the label word drowns in random words, which hurts
                      averaged word vectors but leaves tf-idf intact
  ambiguity_dilution  conflicting sentiment words surround the label word
"""
from tabtext.breaklab import make_break_table, run_break_suite, toy_vector_file
from tabtext.embed import HashedNgram, TfIdf, WordVecAvg
from tabtext.models import Gbdt


def main():
    table = make_break_table(200, seed=0)
    embedders = [TfIdf(), WordVecAvg(str(toy_vector_file())), HashedNgram()]
    model = Gbdt(max_depth=4, learning_rate=0.3, n_rounds=30)
    matrix = run_break_suite([table], embedders, model, seed=0)
    print(matrix.to_text())


if __name__ == "__main__":
    main()
