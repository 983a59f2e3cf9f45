#include "peeler/command_detector.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "peeler/errors.hpp"

namespace peeler {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::optional<RuleGoal> parse_goal(std::string_view s) {
  if (s == "stealth") return RuleGoal::Stealth;
  if (s == "attack") return RuleGoal::Attack;
  if (s == "payment_guidance") return RuleGoal::PaymentGuidance;
  return std::nullopt;
}

// Whitespace-delimited, double quotes group a segment and are dropped.
std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  bool have = false;
  for (char c : s) {
    if (c == '"') {
      in_quotes = !in_quotes;
      have = true;
    } else if (!in_quotes && std::isspace(static_cast<unsigned char>(c))) {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (have) out.push_back(std::move(cur));
  return out;
}

bool glob_match(std::string_view pat, std::string_view s) {
  // Iterative wildcard match with single-star backtracking.
  std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = i;
    } else if (p < pat.size() && pat[p] == s[i]) {
      ++p;
      ++i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

}  // namespace

std::string_view to_string(RuleGoal g) {
  switch (g) {
    case RuleGoal::Stealth:
      return "stealth";
    case RuleGoal::Attack:
      return "attack";
    case RuleGoal::PaymentGuidance:
      return "payment_guidance";
  }
  return "?";
}

RuleSet load_rules(std::istream& in) {
  RuleSet rs;
  std::unordered_set<std::string> ids;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      constexpr std::string_view kVersion = "version:";
      if (body.substr(0, kVersion.size()) == kVersion) rs.version = trim(body.substr(kVersion.size()));
      continue;
    }
    const auto fields = split(line, '|');
    if (fields.size() != 5)
      throw ParseError(line_no, "expected 5 '|'-separated fields, got " + std::to_string(fields.size()));
    CommandRule r;
    r.id = std::string(trim(fields[0]));
    if (r.id.empty()) throw ParseError(line_no, "empty rule id");
    const auto goal = parse_goal(trim(fields[1]));
    if (!goal) throw ParseError(line_no, "unknown goal '" + std::string(trim(fields[1])) + "'");
    r.goal = *goal;
    r.utility = lower(trim(fields[2]));
    if (r.utility.empty()) throw ParseError(line_no, "empty utility");
    for (auto tok : split(trim(fields[3]), ',')) {
      tok = trim(tok);
      if (!tok.empty()) r.required_tokens.push_back(lower(tok));
    }
    if (r.required_tokens.empty())
      throw ParseError(line_no, "rule '" + r.id + "' needs at least one token");
    r.description = std::string(trim(fields[4]));
    if (!ids.insert(r.id).second) throw DuplicateRuleId("duplicate rule id '" + r.id + "'");
    rs.rules.push_back(std::move(r));
  }
  return rs;
}

RuleSet load_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rules '" + path + "'");
  return load_rules(in);
}

RuleSet default_rules() {
  std::istringstream in{std::string(default_rules_text())};
  return load_rules(in);
}

NormalizedCommand normalize_command(std::string_view command_line) {
  NormalizedCommand out;
  auto tokens = tokenize(command_line);
  if (tokens.empty()) return out;
  std::string_view first = tokens.front();
  const auto sep = first.find_last_of("\\/");
  if (sep != std::string_view::npos) first.remove_prefix(sep + 1);
  out.utility = lower(first);
  constexpr std::string_view kExe = ".exe";
  if (out.utility.size() >= kExe.size() &&
      out.utility.compare(out.utility.size() - kExe.size(), kExe.size(), kExe) == 0)
    out.utility.resize(out.utility.size() - kExe.size());
  out.tokens.reserve(tokens.size() - 1);
  for (std::size_t i = 1; i < tokens.size(); ++i) out.tokens.push_back(lower(tokens[i]));
  return out;
}

bool token_matches(std::string_view pattern, std::string_view token) {
  if (pattern.find('*') != std::string_view::npos) return glob_match(pattern, token);
  return pattern == token;
}

std::optional<std::size_t> match_normalized(const RuleSet& rules, const NormalizedCommand& cmd) {
  std::string joined;
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto& r = rules.rules[i];
    if (r.utility != cmd.utility) continue;
    const bool all = std::all_of(r.required_tokens.begin(), r.required_tokens.end(), [&](const std::string& t) {
      if (t.find(' ') != std::string::npos) {
        if (joined.empty()) {
          for (const auto& tok : cmd.tokens) {
            if (!joined.empty()) joined.push_back(' ');
            joined += tok;
          }
        }
        return joined.find(t) != std::string::npos;
      }
      return std::any_of(cmd.tokens.begin(), cmd.tokens.end(),
                         [&](const std::string& tok) { return token_matches(t, tok); });
    });
    if (all) return i;
  }
  return std::nullopt;
}

std::optional<Alert> match_command(const RuleSet& rules, const Event& e) {
  if (!e.is_process_start()) return std::nullopt;
  const auto* pa = e.as<ProcessAttrs>();
  if (!pa) return std::nullopt;
  const auto hit = match_normalized(rules, normalize_command(pa->command_line));
  if (!hit) return std::nullopt;
  return Alert{DetectorKind::CommandRule, e.pid, rules.rules[*hit].id, e.timestamp, e.timestamp};
}

}  // namespace peeler
