#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "euph/checkpoint.hpp"
#include "euph/corpus.hpp"
#include "euph/error.hpp"
#include "euph/imagery.hpp"

namespace euph {

struct LexiconRevision {
  std::string pet_id;
  std::string description;
  long revision = 0;
  std::string author;
  std::string timestamp;
};

struct PetSummary {
  std::string pet_id;
  std::string term;
  std::string description;
  long revision = 0;
  std::size_t example_count = 0;
};

struct ScoreDiff {
  std::string example_id;
  double p_hat_before = 0;
  double p_hat_after = 0;
  int y_hat_before = 0;
  int y_hat_after = 0;

  double magnitude() const;
};

// Revisioned lexicon. State = base lexicon (every entry at revision 0) plus
// the append-only audit log replayed in order; a snapshot file with the
// current state is rewritten after every accepted edit.
class LexiconStore {
 public:
  using Clock = std::function<std::string()>;

  LexiconStore(std::vector<PetEntry> base, std::filesystem::path audit_log, std::filesystem::path snapshot,
               Clock clock = {});

  std::vector<PetEntry> entries() const;
  std::vector<std::pair<PetEntry, long>> state() const;
  std::optional<std::pair<PetEntry, long>> get(std::string_view pet_id) const;
  long revision(std::string_view pet_id) const;

  // Optimistic concurrency: succeeds only if expected_revision is current.
  LexiconRevision put(std::string_view pet_id, std::string description, long expected_revision,
                      std::string author = "curator");

  // Base entries with the audit log applied; throws DataError if the log is
  // inconsistent (unknown pet, non-consecutive revisions).
  static std::vector<std::pair<PetEntry, long>> replay(const std::vector<PetEntry>& base,
                                                       const std::filesystem::path& audit_log);

  const std::filesystem::path& audit_log() const { return audit_log_; }
  const std::filesystem::path& snapshot_path() const { return snapshot_; }

 private:
  void write_snapshot_locked() const;

  std::filesystem::path audit_log_;
  std::filesystem::path snapshot_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::vector<std::pair<PetEntry, long>> state_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Loads checkpoint directories below a root on first use. Ids are paths
// relative to the root, e.g. "desc/fold-0".
class CheckpointRegistry {
 public:
  explicit CheckpointRegistry(std::filesystem::path root);

  std::vector<std::string> ids() const;
  // Last desc checkpoint in id order, else the last of any variant.
  std::optional<std::string> default_id() const;
  const LoadedCheckpoint& get(const std::string& id);

 private:
  std::filesystem::path root_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<LoadedCheckpoint>> loaded_;
};

struct ImageryPreview {
  std::string term_url;
  std::string description_url;
  int k = 0;
};

class CurationService {
 public:
  CurationService(LexiconStore& lexicon, std::vector<Example> examples, ImageryStore* imagery,
                  CheckpointRegistry* checkpoints);

  std::vector<PetSummary> list_pets() const;
  PetSummary get_pet(std::string_view pet_id) const;
  std::vector<Example> examples_for(std::string_view pet_id) const;

  LexiconRevision put_description(std::string_view pet_id, std::string description, long expected_revision,
                                  std::string author = "curator");

  ImageryPreview preview_imagery(std::string_view pet_id);

  // Scores the checkpoint's validation examples of this PET with the stored
  // description and with the draft; largest |change| first.
  std::vector<ScoreDiff> rescore(std::string_view pet_id, const std::string& draft,
                                 std::optional<std::string> checkpoint_id = std::nullopt);

  LexiconStore& lexicon() { return lexicon_; }
  ImageryStore* imagery() { return imagery_; }

  static constexpr const char* kSheetRoute = "/sheets";

 private:
  LexiconStore& lexicon_;
  std::vector<Example> examples_;
  ImageryStore* imagery_;
  CheckpointRegistry* checkpoints_;
};

// HTTP+JSON front end:
//   GET  /pets                  GET /pets/{id}         PUT /pets/{id}
//   POST /pets/{id}/imagery     POST /pets/{id}/rescore
//   GET  /examples?pet={id}     GET /sheets/<digest>.png
// Failures answer {"error": {"kind", "message"}} with a matching status.
class CurationServer {
 public:
  explicit CurationServer(CurationService& service);
  ~CurationServer();
  CurationServer(const CurationServer&) = delete;
  CurationServer& operator=(const CurationServer&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int http_status(ErrorKind kind);

}  // namespace euph
