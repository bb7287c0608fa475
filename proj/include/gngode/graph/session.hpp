#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "gngode/errors.hpp"

namespace gngode {

struct RawClick {
  std::string item;
  double time = 0.0;
};

/// A session as read from disk, keyed by raw item strings.
struct RawSession {
  std::string id;
  std::vector<RawClick> clicks;
};

struct Click {
  std::size_t item = 0;
  double time = 0.0;

  friend bool operator==(const Click&, const Click&) = default;
};

/// A session over vocabulary indices; timestamps are non-decreasing.
struct Session {
  std::string id;
  std::vector<Click> clicks;

  std::size_t size() const noexcept { return clicks.size(); }
};

/// One next-item prediction problem: the clicks so far and the item that follows.
struct Sample {
  Session prefix;
  std::size_t target = 0;
};

class Vocabulary {
 public:
  std::size_t add(const std::string& key) {
    auto [it, inserted] = index_.try_emplace(key, keys_.size());
    if (inserted) keys_.push_back(key);
    return it->second;
  }

  std::optional<std::size_t> find(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(std::string_view key) const {
    auto i = find(key);
    if (!i) throw UsageError("unknown item key '" + std::string(key) + "'");
    return *i;
  }

  const std::string& key(std::size_t index) const { return keys_.at(index); }
  std::size_t size() const noexcept { return keys_.size(); }
  const std::vector<std::string>& keys() const noexcept { return keys_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.keys_ == b.keys_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> keys_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads `session_id,item_key,timestamp` lines. A first line whose timestamp
/// field is not numeric is treated as a header. Sessions keep the order in
/// which their ids first appear; clicks are stably sorted by time.
inline std::vector<RawSession> parse_sessions(std::istream& in) {
  std::vector<RawSession> sessions;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split(view, ',');
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 comma-separated fields, got " + std::to_string(fields.size()));
    }
    const auto ts = detail::parse_double(fields[2]);
    if (!ts) {
      if (first_content) {
        first_content = false;
        continue;
      }
      throw ParseError(line_no, "timestamp '" + std::string(detail::trim(fields[2])) + "' is not a number");
    }
    first_content = false;
    if (!std::isfinite(*ts)) throw ParseError(line_no, "timestamp is not finite");
    if (*ts < 0.0) throw ValidationError("line " + std::to_string(line_no) + ": negative timestamp");
    const std::string id(detail::trim(fields[0]));
    const std::string item(detail::trim(fields[1]));
    if (id.empty() || item.empty()) throw ParseError(line_no, "empty session id or item key");
    auto [it, inserted] = slot.try_emplace(id, sessions.size());
    if (inserted) sessions.push_back(RawSession{id, {}});
    sessions[it->second].clicks.push_back(RawClick{item, *ts});
  }
  for (auto& s : sessions) {
    std::stable_sort(s.clicks.begin(), s.clicks.end(),
                     [](const RawClick& a, const RawClick& b) { return a.time < b.time; });
  }
  return sessions;
}

inline std::vector<RawSession> parse_sessions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open session file '" + path + "'");
  return parse_sessions(in);
}

struct PreprocessResult {
  Vocabulary vocabulary;
  std::vector<Session> sessions;
};

/// Drops items seen fewer than `min_item_freq` times, then sessions shorter
/// than `min_len`. Vocabulary indices follow first appearance among survivors.
inline PreprocessResult preprocess(const std::vector<RawSession>& raw, std::size_t min_len = 2,
                                   std::size_t min_item_freq = 5) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& s : raw)
    for (const auto& c : s.clicks) ++freq[c.item];

  PreprocessResult out;
  for (const auto& s : raw) {
    std::vector<const RawClick*> kept;
    for (const auto& c : s.clicks)
      if (freq[c.item] >= min_item_freq) kept.push_back(&c);
    if (kept.empty() || kept.size() < min_len) continue;
    Session session{s.id, {}};
    for (const RawClick* c : kept) session.clicks.push_back(Click{out.vocabulary.add(c->item), c->time});
    out.sessions.push_back(std::move(session));
  }
  if (out.sessions.empty()) throw DatasetError("no sessions survive preprocessing");
  return out;
}

/// A raw session mapped onto an existing vocabulary; unknown keys are nullopt.
struct MappedSession {
  std::string id;
  std::vector<std::optional<std::size_t>> items;
  std::vector<double> times;
};

inline std::vector<MappedSession> map_sessions(const std::vector<RawSession>& raw, const Vocabulary& vocab) {
  std::vector<MappedSession> out;
  out.reserve(raw.size());
  for (const auto& s : raw) {
    MappedSession m{s.id, {}, {}};
    for (const auto& c : s.clicks) {
      m.items.push_back(vocab.find(c.item));
      m.times.push_back(c.time);
    }
    out.push_back(std::move(m));
  }
  return out;
}

/// (first t clicks, click t+1) for t = 1..n-1.
inline std::vector<Sample> augment(const Session& session) {
  if (session.size() < 2) throw UsageError("augment needs a session of at least 2 clicks");
  std::vector<Sample> out;
  out.reserve(session.size() - 1);
  for (std::size_t t = 1; t < session.size(); ++t) {
    Sample s;
    s.prefix.id = session.id;
    s.prefix.clicks.assign(session.clicks.begin(), session.clicks.begin() + static_cast<std::ptrdiff_t>(t));
    s.target = session.clicks[t].item;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sample> augment_all(const std::vector<Session>& sessions) {
  std::vector<Sample> out;
  for (const auto& s : sessions) {
    if (s.size() < 2) continue;
    auto part = augment(s);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

/// Orders sessions by start time (ties by id) and cuts off the last `fraction`.
template <class SessionT>
std::pair<std::vector<SessionT>, std::vector<SessionT>> chronological_split(std::vector<SessionT> sessions,
                                                                            double fraction) {
  auto start = [](const SessionT& s) { return s.clicks.empty() ? 0.0 : s.clicks.front().time; };
  std::stable_sort(sessions.begin(), sessions.end(), [&](const SessionT& a, const SessionT& b) {
    if (start(a) != start(b)) return start(a) < start(b);
    return a.id < b.id;
  });
  const auto held = static_cast<std::size_t>(static_cast<double>(sessions.size()) * fraction);
  const std::size_t cut = sessions.size() - held;
  std::vector<SessionT> head(sessions.begin(), sessions.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<SessionT> tail(sessions.begin() + static_cast<std::ptrdiff_t>(cut), sessions.end());
  return {std::move(head), std::move(tail)};
}

inline void write_sessions(std::ostream& out, const std::vector<Session>& sessions, const Vocabulary& vocab) {
  for (const auto& s : sessions)
    for (const auto& c : s.clicks)
      out << s.id << ',' << vocab.key(c.item) << ',' << detail::format_double(c.time) << '\n';
}

inline void write_sessions(std::ostream& out, const std::vector<RawSession>& sessions) {
  for (const auto& s : sessions)
    for (const auto& c : s.clicks) out << s.id << ',' << c.item << ',' << detail::format_double(c.time) << '\n';
}

inline void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.key(i) << ',' << i << '\n';
}

inline Vocabulary read_vocabulary(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    const auto pos = view.rfind(',');
    if (pos == std::string_view::npos) throw ParseError(line_no, "expected item_key,index");
    const auto idx = detail::parse_double(view.substr(pos + 1));
    const std::string key(view.substr(0, pos));
    if (!idx || *idx != static_cast<double>(vocab.size())) {
      throw ParseError(line_no, "vocabulary indices must be dense and ordered");
    }
    vocab.add(key);
  }
  return vocab;
}

inline Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file '" + path + "'");
  return read_vocabulary(in);
}

}  // namespace gngode
