// Regenerates the expected score for the shipped sample texts from the naive implementation.
// Usage: misem_golden <reference.txt> <summary.txt>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "misem/embedding.hpp"
#include "misem/mock_backend.hpp"
#include "misem/text_prep.hpp"
#include "oracle/naive_misem.hpp"

namespace {

std::string slurp(const char* path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <reference.txt> <summary.txt>\n", argv[0]);
    return 2;
  }
  using namespace misem;
  const auto reference = text::sentence_texts(text::merge_reference_documents({{argv[1], slurp(argv[1])}}));
  const auto summary = text::sentence_texts(text::split_sentences({"summary", slurp(argv[2])}));
  const embed::MockBackend mock(42);
  const auto ref = embed::embed_sentences(reference, mock);
  const auto sum = embed::embed_summary_tokens(summary, mock);
  const auto result = oracle::naive_misem(ref.embeddings.to_rows(), sum.embeddings.to_rows(), 0.38);
  std::printf("score: %.6f\n", result.m);
  return 0;
}
