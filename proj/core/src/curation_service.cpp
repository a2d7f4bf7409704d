#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <set>
#include <sstream>

#include <json.hpp>

#include "euph/curation.hpp"
#include "euph/error.hpp"
#include "euph/experiments.hpp"
#include "euph/io.hpp"

namespace euph {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

double ScoreDiff::magnitude() const { return std::fabs(p_hat_after - p_hat_before); }

// --- LexiconStore --------------------------------------------------------

LexiconStore::LexiconStore(std::vector<PetEntry> base, fs::path audit_log, fs::path snapshot, Clock clock)
    : audit_log_(std::move(audit_log)), snapshot_(std::move(snapshot)), clock_(std::move(clock)) {
  if (!clock_) clock_ = utc_now;
  Lexicon check(base, LexiconMode::kLenient);  // rejects duplicate ids
  state_ = replay(base, audit_log_);
  for (std::size_t i = 0; i < state_.size(); ++i) index_.emplace(state_[i].first.pet_id, i);
}

std::vector<std::pair<PetEntry, long>> LexiconStore::replay(const std::vector<PetEntry>& base,
                                                            const fs::path& audit_log) {
  std::vector<std::pair<PetEntry, long>> state;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& e : base) {
    index.emplace(e.pet_id, state.size());
    state.emplace_back(e, 0L);
  }
  if (audit_log.empty() || !fs::exists(audit_log)) return state;
  std::istringstream lines(read_file(audit_log));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = audit_log.string() + ":" + std::to_string(line_no);
    try {
      auto rec = json::parse(line);
      const auto id = rec.at("pet_id").get<std::string>();
      auto it = index.find(id);
      if (it == index.end()) throw DataError(where + ": unknown pet_id " + id);
      auto& [entry, rev] = state[it->second];
      const long r = rec.at("revision").get<long>();
      if (r != rev + 1) throw DataError(where + ": revision " + std::to_string(r) + " does not follow " + std::to_string(rev));
      entry.description = rec.at("description").get<std::string>();
      rev = r;
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed audit record: " + e.what());
    }
  }
  return state;
}

std::vector<PetEntry> LexiconStore::entries() const {
  std::shared_lock lock(mu_);
  std::vector<PetEntry> out;
  out.reserve(state_.size());
  for (const auto& [e, r] : state_) out.push_back(e);
  return out;
}

std::vector<std::pair<PetEntry, long>> LexiconStore::state() const {
  std::shared_lock lock(mu_);
  return state_;
}

std::optional<std::pair<PetEntry, long>> LexiconStore::get(std::string_view pet_id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(pet_id);
  if (it == index_.end()) return std::nullopt;
  return state_[it->second];
}

long LexiconStore::revision(std::string_view pet_id) const {
  auto e = get(pet_id);
  if (!e) throw NotFound("unknown pet_id: " + std::string(pet_id));
  return e->second;
}

void LexiconStore::write_snapshot_locked() const {
  if (snapshot_.empty()) return;
  json doc = json::array();
  for (const auto& [e, r] : state_) {
    doc.push_back({{"pet_id", e.pet_id}, {"term", e.term}, {"description", e.description},
                   {"variants", e.variants}, {"revision", r}});
  }
  write_file_atomic(snapshot_, doc.dump(2) + "\n");
}

LexiconRevision LexiconStore::put(std::string_view pet_id, std::string description, long expected_revision,
                                  std::string author) {
  if (std::all_of(description.begin(), description.end(), [](unsigned char c) { return std::isspace(c); }))
    throw ValidationError("description must not be empty");
  std::unique_lock lock(mu_);
  auto it = index_.find(pet_id);
  if (it == index_.end()) throw NotFound("unknown pet_id: " + std::string(pet_id));
  auto& [entry, rev] = state_[it->second];
  if (expected_revision != rev)
    throw ConflictError("stale revision for " + entry.pet_id + ": expected " + std::to_string(expected_revision) +
                        ", current is " + std::to_string(rev));
  LexiconRevision out{entry.pet_id, std::move(description), rev + 1, std::move(author), clock_()};
  json rec = {{"pet_id", out.pet_id},       {"description", out.description}, {"previous_description", entry.description},
              {"revision", out.revision},   {"author", out.author},           {"timestamp", out.timestamp}};
  if (!audit_log_.empty()) append_line(audit_log_, rec.dump());
  entry.description = out.description;
  rev = out.revision;
  write_snapshot_locked();
  return out;
}

// --- CheckpointRegistry --------------------------------------------------

CheckpointRegistry::CheckpointRegistry(fs::path root) : root_(std::move(root)) {}

std::vector<std::string> CheckpointRegistry::ids() const {
  std::vector<std::string> out;
  if (!fs::exists(root_)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
      out.push_back(fs::relative(entry.path().parent_path(), root_).generic_string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> CheckpointRegistry::default_id() const {
  const auto all = ids();
  if (all.empty()) return std::nullopt;
  for (auto it = all.rbegin(); it != all.rend(); ++it) {
    if (load_manifest(root_ / *it).classifier.variant == Variant::kDesc) return *it;
  }
  return all.back();
}

const LoadedCheckpoint& CheckpointRegistry::get(const std::string& id) {
  std::lock_guard lock(mu_);
  if (auto it = loaded_.find(id); it != loaded_.end()) return *it->second;
  const auto dir = root_ / id;
  if (id.find("..") != std::string::npos || !fs::exists(dir / "manifest.json"))
    throw NotFound("no checkpoint '" + id + "' under " + root_.string());
  auto [it, _] = loaded_.emplace(id, std::make_unique<LoadedCheckpoint>(load_checkpoint(dir)));
  return *it->second;
}

// --- CurationService -----------------------------------------------------

CurationService::CurationService(LexiconStore& lexicon, std::vector<Example> examples, ImageryStore* imagery,
                                 CheckpointRegistry* checkpoints)
    : lexicon_(lexicon), examples_(std::move(examples)), imagery_(imagery), checkpoints_(checkpoints) {}

std::vector<PetSummary> CurationService::list_pets() const {
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& ex : examples_) ++counts[ex.pet_id];
  std::vector<PetSummary> out;
  for (const auto& [e, rev] : lexicon_.state()) {
    auto c = counts.find(e.pet_id);
    out.push_back({e.pet_id, e.term, e.description, rev, c == counts.end() ? 0 : c->second});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.term != b.term ? a.term < b.term : a.pet_id < b.pet_id;
  });
  return out;
}

PetSummary CurationService::get_pet(std::string_view pet_id) const {
  auto e = lexicon_.get(pet_id);
  if (!e) throw NotFound("unknown pet_id: " + std::string(pet_id));
  std::size_t count = 0;
  for (const auto& ex : examples_) count += ex.pet_id == pet_id;
  return {e->first.pet_id, e->first.term, e->first.description, e->second, count};
}

std::vector<Example> CurationService::examples_for(std::string_view pet_id) const {
  if (!lexicon_.get(pet_id)) throw NotFound("unknown pet_id: " + std::string(pet_id));
  std::vector<Example> out;
  for (const auto& ex : examples_)
    if (ex.pet_id == pet_id) out.push_back(ex);
  return out;
}

LexiconRevision CurationService::put_description(std::string_view pet_id, std::string description,
                                                 long expected_revision, std::string author) {
  return lexicon_.put(pet_id, std::move(description), expected_revision, std::move(author));
}

ImageryPreview CurationService::preview_imagery(std::string_view pet_id) {
  if (imagery_ == nullptr) throw BackendError("no imagery backend configured");
  auto e = lexicon_.get(pet_id);
  if (!e) throw NotFound("unknown pet_id: " + std::string(pet_id));
  if (e->first.description.empty()) throw ValidationError("pet " + std::string(pet_id) + " has no description yet");
  ImageryPreview out;
  out.term_url = std::string(kSheetRoute) + "/" + fs::path(imagery_->sheet_for(e->first.term)).filename().string();
  out.description_url =
      std::string(kSheetRoute) + "/" + fs::path(imagery_->sheet_for(e->first.description)).filename().string();
  out.k = imagery_->options().k;
  return out;
}

std::vector<ScoreDiff> CurationService::rescore(std::string_view pet_id, const std::string& draft,
                                                std::optional<std::string> checkpoint_id) {
  auto stored = lexicon_.get(pet_id);
  if (!stored) throw NotFound("unknown pet_id: " + std::string(pet_id));
  if (draft.empty()) throw ValidationError("draft description must not be empty");
  if (checkpoints_ == nullptr || (!checkpoint_id && !checkpoints_->default_id()))
    throw NotFound("no checkpoint available; train a model first (euph train)");
  const auto& ckpt = checkpoints_->get(checkpoint_id ? *checkpoint_id : *checkpoints_->default_id());
  const auto& model = ckpt.model;
  const auto variant = model.config().variant;

  std::vector<const Example*> targets;
  const std::set<std::string> val(ckpt.manifest.val_ids.begin(), ckpt.manifest.val_ids.end());
  for (const auto& ex : examples_)
    if (ex.pet_id == pet_id && val.count(ex.id)) targets.push_back(&ex);
  if (targets.empty()) return {};

  PetEntry before = stored->first;
  PetEntry after = before;
  after.description = draft;
  std::optional<ImageryPair> img_before, img_after;
  if (variant == Variant::kDescImag) {
    if (imagery_ == nullptr) throw BackendError("desc_imag rescoring needs an imagery backend");
    const auto term = imagery_->embedding_for(before.term).vector;
    img_before = ImageryPair{term, imagery_->embedding_for(before.description).vector};
    img_after = ImageryPair{term, imagery_->embedding_for(draft).vector};
  }
  const auto pv = prompt_variant(variant);
  std::vector<ScoreDiff> diffs;
  for (const auto* ex : targets) {
    const auto pb = model.predict(build_prompt(pv, before, *ex, LexiconMode::kLenient, model.config().prompt_template), img_before);
    const auto pa = model.predict(build_prompt(pv, after, *ex, LexiconMode::kLenient, model.config().prompt_template), img_after);
    diffs.push_back({ex->id, pb.p_hat, pa.p_hat, pb.y_hat, pa.y_hat});
  }
  std::stable_sort(diffs.begin(), diffs.end(), [](const ScoreDiff& a, const ScoreDiff& b) {
    if (a.magnitude() != b.magnitude()) return a.magnitude() > b.magnitude();
    return a.example_id < b.example_id;
  });
  return diffs;
}

}  // namespace euph
