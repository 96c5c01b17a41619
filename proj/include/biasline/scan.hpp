#pragma once

#include <cstdint>

#include "biasline/classify.hpp"
#include "biasline/corpus.hpp"

namespace biasline {

/// Summary of one pass over a corpus. Unit tallies are taken before the
/// per-occupation cap is applied.
struct ScanStats {
  uint64_t docs_read = 0;
  uint64_t malformed = 0;
  uint64_t text_bytes = 0;
  uint64_t docs_with_occupation = 0;
  UnitStats units;
};

struct ScanResult {
  CountsTable table;
  ScanStats stats;
};

/// Streams `docs`, counts every document for every occupation it mentions,
/// and keeps only the contributions of the `spec.cap` documents per
/// occupation with the smallest sample keys. Shards processed by `threads`
/// workers merge to the same table for any thread count.
ScanResult scan_corpus(CorpusReader& docs, const LexiconBundle& bundle, const ScanOptions& options,
                       const SampleSpec& spec, unsigned threads = 1);

ScanResult scan_corpus(const DocumentSource& docs, const LexiconBundle& bundle,
                       const ScanOptions& options, const SampleSpec& spec, unsigned threads = 1);

}  // namespace biasline
