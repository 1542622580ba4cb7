#include "latlm/data/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "latlm/errors.hpp"

namespace latlm::data {

namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<std::string> pick_confusables(const std::string& word, std::size_t count,
                                          const std::vector<std::string>& pool, Rng& rng) {
  std::set<std::string> distinct(pool.begin(), pool.end());
  distinct.erase(word);
  if (distinct.size() < count) {
    throw DataError("confusion pool has " + std::to_string(distinct.size()) +
                    " alternatives to '" + word + "', need " + std::to_string(count));
  }
  std::vector<std::string> neighbours;
  for (const auto& w : distinct) {
    if (edit_distance_one(w, word)) neighbours.push_back(w);
  }
  std::vector<std::string> chosen;
  while (chosen.size() < count) {
    std::vector<std::string> open;
    for (const auto& n : neighbours) {
      if (std::find(chosen.begin(), chosen.end(), n) == chosen.end()) open.push_back(n);
    }
    if (!open.empty() && uniform01(rng) < 0.7) {
      chosen.push_back(open[uniform_index(rng, open.size())]);
      continue;
    }
    const std::string& w = pool[uniform_index(rng, pool.size())];
    if (w != word && std::find(chosen.begin(), chosen.end(), w) == chosen.end()) {
      chosen.push_back(w);
    }
  }
  return chosen;
}

std::vector<std::string> split_alternative(const std::string& alt) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : alt) {
    if (c == '_') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> alternatives(const std::string& field) {
  if (field.size() >= 2 && field.front() == '{' && field.back() == '}') {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 1; i + 1 < field.size(); ++i) {
      if (field[i] == '|') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += field[i];
      }
    }
    out.push_back(cur);
    return out;
  }
  return {field};
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<double> dirichlet(Rng& rng, std::size_t k, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> w(k);
  double total = 0.0;
  for (double& x : w) {
    x = gamma(rng);
    total += x;
  }
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

void ConfusionModel::check() const {
  auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate(substitution_rate) || !rate(deletion_rate)) {
    throw DataError("confusion rates must lie in [0, 1]");
  }
  if (branches < 2) throw DataError("confusion model needs at least 2 branches");
  if (!(concentration > 0.0)) throw DataError("concentration must be positive");
}

bool edit_distance_one(const std::string& a, const std::string& b) {
  const std::size_t la = a.size(), lb = b.size();
  if (la == lb) {
    std::size_t diff = 0;
    for (std::size_t i = 0; i < la; ++i) diff += a[i] != b[i];
    return diff == 1;
  }
  if (la + 1 != lb && lb + 1 != la) return false;
  const std::string& shorter = la < lb ? a : b;
  const std::string& longer = la < lb ? b : a;
  std::size_t i = 0;
  while (i < shorter.size() && shorter[i] == longer[i]) ++i;
  return shorter.compare(i, std::string::npos, longer, i + 1, std::string::npos) == 0;
}

std::size_t edit_distance(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

lattice::Lattice generate_confusion_lattice(const Sentence& sentence, const ConfusionModel& model,
                                            Rng& rng, std::string id, ConfusionStats* stats) {
  if (sentence.empty()) throw DataError("cannot generate a lattice for an empty sentence");
  model.check();
  const std::vector<std::string>& pool = model.pool.empty() ? sentence : model.pool;

  const std::size_t n = sentence.size();
  lattice::Lattice lat{std::move(id), n + 1, {}};
  ConfusionStats local;
  local.positions = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto from = static_cast<lattice::NodeId>(i);
    const auto to = static_cast<lattice::NodeId>(i + 1);
    if (uniform01(rng) < model.substitution_rate) {
      const auto confusables = pick_confusables(sentence[i], model.branches - 1, pool, rng);
      const auto weights = dirichlet(rng, model.branches, model.concentration);
      lat.transitions.push_back({from, to, sentence[i], weights[0]});
      for (std::size_t k = 0; k < confusables.size(); ++k) {
        lat.transitions.push_back({from, to, confusables[k], weights[k + 1]});
      }
      ++local.substituted;
    } else {
      lat.transitions.push_back({from, to, sentence[i], 1.0});
    }
    if (n >= 2 && uniform01(rng) < model.deletion_rate) {
      const double weight = dirichlet(rng, 2, model.concentration)[0];
      if (i + 1 < n) {
        lat.transitions.push_back({from, static_cast<lattice::NodeId>(i + 2), sentence[i + 1], weight});
      } else {
        lat.transitions.push_back({static_cast<lattice::NodeId>(i - 1), to, sentence[i - 1], weight});
      }
      ++local.deleted;
    }
  }
  lat = lattice::normalize_outgoing(lat);
  lattice::require_valid(lat);
  if (stats) {
    stats->positions += local.positions;
    stats->substituted += local.substituted;
    stats->deleted += local.deleted;
  }
  return lat;
}

std::size_t TemplateSet::combinations(std::size_t label) const {
  std::size_t total = 0;
  for (const auto& pattern : patterns.at(label)) {
    std::size_t product = 1;
    std::istringstream fields(pattern);
    std::string field;
    while (fields >> field) {
      if (field.front() == '$') {
        product *= slots.at(field.substr(1)).size();
      } else {
        product *= alternatives(field).size();
      }
    }
    total += product;
  }
  return total;
}

Sentence TemplateSet::sample(std::size_t label, Rng& rng) const {
  const auto& options = patterns.at(label);
  const std::string& pattern = options[uniform_index(rng, options.size())];
  Sentence out;
  std::istringstream fields(pattern);
  std::string field;
  while (fields >> field) {
    std::string choice;
    if (field.front() == '$') {
      const auto& slot = slots.at(field.substr(1));
      choice = slot[uniform_index(rng, slot.size())];
    } else {
      const auto alts = alternatives(field);
      choice = alts[uniform_index(rng, alts.size())];
    }
    for (auto& tok : split_alternative(choice)) out.push_back(std::move(tok));
  }
  return out;
}

std::vector<std::string> TemplateSet::token_inventory() const {
  std::set<std::string> tokens;
  for (const auto& label_patterns : patterns) {
    for (const auto& pattern : label_patterns) {
      std::istringstream fields(pattern);
      std::string field;
      while (fields >> field) {
        if (field.front() == '$') continue;
        for (const auto& alt : alternatives(field)) {
          for (auto& tok : split_alternative(alt)) tokens.insert(tok);
        }
      }
    }
  }
  for (const auto& [_, values] : slots) {
    for (const auto& v : values) {
      for (auto& tok : split_alternative(v)) tokens.insert(tok);
    }
  }
  return {tokens.begin(), tokens.end()};
}

TemplateSet default_intent_templates() {
  TemplateSet t;
  t.labels = {"book_travel", "get_weather", "play_music", "find_food", "set_alarm"};
  t.slots["city"] = {"boston", "denver", "austin",  "dallas",  "seattle",
                     "miami",  "chicago", "phoenix", "atlanta", "houston"};
  t.slots["day"] = {"monday", "tuesday", "wednesday", "thursday", "friday",
                    "saturday", "sunday", "today", "tomorrow"};
  t.slots["artist"] = {"adele", "drake", "queen", "prince", "madonna", "beyonce"};
  t.slots["time"] = {"six", "seven", "eight", "nine", "ten", "eleven"};
  t.slots["food"] = {"pizza", "sushi", "tacos", "pasta", "curry", "noodles"};
  t.patterns = {
      {"{i_want_to|please|can_you} {book|get|reserve} {a|one} {flight|ticket|seat|train|plane} "
       "{to|from} $city {on|for} $day",
       "{book|get} me {a|the} {flight|seat|train} to $city"},
      {"{will_it|does_it} {rain|snow|hail} in $city $day",
       "{what_is|how_is} the {weather|wind|heat} in $city {on|for} $day"},
      {"{play|put_on} {some|the} {song|songs|music|track|album} by $artist",
       "{i_want_to|please} {hear|play} $artist {now|today|again}",
       "{queue|shuffle|start} $artist {on|in} the {kitchen|car|bedroom|living_room}"},
      {"{find|look_for|show_me} {a|the} {table|place|spot} for $food in $city",
       "{where|how} can i {eat|get} $food {near|in} $city"},
      {"{set|make|add} {an_alarm|a_reminder|a_timer} for $time {today|tomorrow|tonight}",
       "{wake|call} me {at|by} $time $day"},
  };
  return t;
}

SyntheticTask make_synthetic_task(const TemplateSet& templates, const SplitSizes& sizes,
                                  ConfusionModel model, std::uint64_t seed) {
  if (templates.labels.size() < 2) throw DataError("a synthetic task needs at least 2 labels");
  if (templates.patterns.size() != templates.labels.size()) {
    throw DataError("template patterns do not match the label list");
  }
  model.check();
  if (model.pool.empty()) model.pool = templates.token_inventory();

  Rng rng(seed);
  const std::size_t need = sizes.train + sizes.valid + sizes.test;
  std::set<Sentence> seen;
  std::vector<std::vector<Sentence>> per_label(templates.labels.size());
  for (std::size_t label = 0; label < templates.labels.size(); ++label) {
    if (templates.combinations(label) < need) {
      throw DataError("templates for label " + templates.labels[label] + " yield only " +
                      std::to_string(templates.combinations(label)) + " sentences, need " +
                      std::to_string(need));
    }
    std::size_t attempts = 0;
    while (per_label[label].size() < need) {
      if (++attempts > need * 200) {
        throw DataError("could not draw " + std::to_string(need) +
                        " distinct sentences for label " + templates.labels[label]);
      }
      Sentence s = templates.sample(label, rng);
      if (seen.insert(s).second) per_label[label].push_back(std::move(s));
    }
  }

  SyntheticTask task;
  task.labels = templates.labels;
  ConfusionStats stats;
  std::size_t one_best_errors = 0, oracle_errors = 0, reference_tokens = 0;

  auto build_split = [&](const char* name, std::size_t offset, std::size_t count) {
    std::vector<std::pair<Sentence, std::size_t>> items;
    for (std::size_t label = 0; label < per_label.size(); ++label) {
      for (std::size_t i = 0; i < count; ++i) items.emplace_back(per_label[label][offset + i], label);
    }
    std::shuffle(items.begin(), items.end(), rng);
    std::vector<TaskExample> out;
    out.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s-%05zu", name, i);
      TaskExample ex;
      ex.id = id;
      ex.clean = items[i].first;
      ex.label = items[i].second;
      ex.lattice = generate_confusion_lattice(ex.clean, model, rng, ex.id, &stats);
      ex.one_best = lattice::one_best_path(ex.lattice);
      one_best_errors += edit_distance(ex.one_best, ex.clean);
      oracle_errors += lattice::oracle_edit_distance(ex.lattice, ex.clean);
      reference_tokens += ex.clean.size();
      out.push_back(std::move(ex));
    }
    return out;
  };
  task.train = build_split("train", 0, sizes.train);
  task.valid = build_split("valid", sizes.train, sizes.valid);
  task.test = build_split("test", sizes.train + sizes.valid, sizes.test);

  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  task.manifest = {
      {"generator", kRngName},
      {"seed", std::to_string(seed)},
      {"substitution_rate", fixed(model.substitution_rate)},
      {"branches", std::to_string(model.branches)},
      {"deletion_rate", fixed(model.deletion_rate)},
      {"concentration", fixed(model.concentration)},
      {"labels", join(templates.labels, ",")},
      {"train_per_label", std::to_string(sizes.train)},
      {"valid_per_label", std::to_string(sizes.valid)},
      {"test_per_label", std::to_string(sizes.test)},
      {"train_size", std::to_string(task.train.size())},
      {"valid_size", std::to_string(task.valid.size())},
      {"test_size", std::to_string(task.test.size())},
      {"achieved_corruption_rate", fixed(ratio(stats.substituted, stats.positions))},
      {"achieved_deletion_rate", fixed(ratio(stats.deleted, stats.positions))},
      {"one_best_wer", fixed(ratio(one_best_errors, reference_tokens))},
      {"oracle_wer", fixed(ratio(oracle_errors, reference_tokens))},
  };
  return task;
}

std::vector<Sentence> sample_text_corpus(const TemplateSet& templates, std::size_t count,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(templates.sample(uniform_index(rng, templates.labels.size()), rng));
  }
  return out;
}

}  // namespace latlm::data
