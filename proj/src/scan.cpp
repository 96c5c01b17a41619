#include "biasline/scan.hpp"

#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>

#include "biasline/error.hpp"

namespace biasline {
namespace {

using Sampler = KMinSampler<OccupationCounts>;

struct Shard {
  std::vector<Sampler> samplers;
  UnitStats units;
  uint64_t docs_with_occupation = 0;

  Shard(size_t occupations, uint64_t cap) : samplers(occupations, Sampler(cap)) {}

  void merge(Shard&& other) {
    for (size_t i = 0; i < samplers.size(); ++i) samplers[i].merge(std::move(other.samplers[i]));
    units += other.units;
    docs_with_occupation += other.docs_with_occupation;
  }
};

void process(const CooccurrenceCounter& counter, const SampleSpec& spec, const Document& doc,
             Shard& shard, std::vector<CooccurrenceCounter::Contribution>& contrib) {
  counter.scan(doc.text, contrib, &shard.units);
  if (contrib.empty()) return;
  ++shard.docs_with_occupation;
  const auto& names = counter.occupations();
  for (const auto& c : contrib)
    shard.samplers[c.occupation].offer(sample_key(spec.seed, names[c.occupation], doc.id), c.counts);
}

// Bounded batch queue between the reading thread and the workers.
class BatchQueue {
 public:
  explicit BatchQueue(size_t capacity) : capacity_(capacity) {}

  void push(std::vector<Document> batch) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || aborted_; });
    if (aborted_) return;
    queue_.push_back(std::move(batch));
    not_empty_.notify_one();
  }

  bool pop(std::vector<Document>& batch) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_ || aborted_; });
    if (aborted_ || queue_.empty()) return false;
    batch = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void abort() {
    std::lock_guard lock(mu_);
    aborted_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<std::vector<Document>> queue_;
  bool closed_ = false;
  bool aborted_ = false;
};

ScanResult finish(const LexiconBundle& bundle, const ScanOptions& options, const SampleSpec& spec,
                  Shard& shard) {
  ScanResult result;
  result.table = CountsTable::zeros(bundle, options.mode);
  result.table.meta.seed = spec.seed;
  result.table.meta.cap = spec.cap;
  for (size_t i = 0; i < shard.samplers.size(); ++i)
    for (const auto& entry : shard.samplers[i].sorted()) result.table.counts[i] += entry.second;
  result.stats.units = shard.units;
  result.stats.docs_with_occupation = shard.docs_with_occupation;
  return result;
}

}  // namespace

ScanResult scan_corpus(const DocumentSource& docs, const LexiconBundle& bundle,
                       const ScanOptions& options, const SampleSpec& spec, unsigned threads) {
  if (spec.cap < 1) throw ConfigError("sample cap must be >= 1");
  const CooccurrenceCounter counter(bundle, options);
  const size_t n_occ = bundle.occupations.size();
  uint64_t docs_read = 0;
  uint64_t text_bytes = 0;

  if (threads <= 1) {
    Shard shard(n_occ, spec.cap);
    std::vector<CooccurrenceCounter::Contribution> contrib;
    Document doc;
    while (docs(doc)) {
      ++docs_read;
      text_bytes += doc.text.size();
      process(counter, spec, doc, shard, contrib);
    }
    ScanResult r = finish(bundle, options, spec, shard);
    r.stats.docs_read = docs_read;
    r.stats.text_bytes = text_bytes;
    return r;
  }

  constexpr size_t kBatch = 512;
  BatchQueue queue(threads * 2);
  std::vector<Shard> shards(threads, Shard(n_occ, spec.cap));
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        std::vector<CooccurrenceCounter::Contribution> contrib;
        std::vector<Document> batch;
        while (queue.pop(batch))
          for (const auto& doc : batch) process(counter, spec, doc, shards[t], contrib);
      } catch (...) {
        errors[t] = std::current_exception();
        queue.abort();
      }
    });
  }

  std::exception_ptr read_error;
  try {
    std::vector<Document> batch;
    batch.reserve(kBatch);
    Document doc;
    while (docs(doc)) {
      ++docs_read;
      text_bytes += doc.text.size();
      batch.push_back(std::move(doc));
      if (batch.size() == kBatch) {
        queue.push(std::move(batch));
        batch = {};
        batch.reserve(kBatch);
      }
    }
    if (!batch.empty()) queue.push(std::move(batch));
    queue.close();
  } catch (...) {
    read_error = std::current_exception();
    queue.abort();
  }
  for (auto& w : workers) w.join();
  if (read_error) std::rethrow_exception(read_error);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (unsigned t = 1; t < threads; ++t) shards[0].merge(std::move(shards[t]));
  ScanResult r = finish(bundle, options, spec, shards[0]);
  r.stats.docs_read = docs_read;
  r.stats.text_bytes = text_bytes;
  return r;
}

ScanResult scan_corpus(CorpusReader& docs, const LexiconBundle& bundle, const ScanOptions& options,
                       const SampleSpec& spec, unsigned threads) {
  ScanResult r = scan_corpus([&](Document& d) { return docs.next(d); }, bundle, options, spec, threads);
  r.stats.malformed = docs.malformed_count();
  return r;
}

}  // namespace biasline
