#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peeler/event.hpp"

namespace peeler {

enum class RuleGoal : std::uint8_t { Stealth, Attack, PaymentGuidance };

std::string_view to_string(RuleGoal g);

/// A command rule fires when the normalized utility equals `utility` and every required token is
/// present among the normalized arguments.
///
/// Token forms:
///  - plain (`delete`): equals some argument;
///  - glob (`*.exe`, `-disable*`): `*` matches any run of characters within one argument;
///  - phrase (`restoring files`): contains a space and must occur as a substring of the
///    space-joined argument string, so quoted and unquoted spellings both match.
struct CommandRule {
  std::string id;
  RuleGoal goal = RuleGoal::Attack;
  std::string utility;
  std::vector<std::string> required_tokens;
  std::string description;
};

struct RuleSet {
  std::vector<CommandRule> rules;
  std::string version = "0";
};

struct NormalizedCommand {
  std::string utility;
  std::vector<std::string> tokens;
};

/// Rules file: `id | goal | utility | token,token,... | description`, `#` comments,
/// optional `# version: X` directive. Throws ParseError or DuplicateRuleId.
RuleSet load_rules(std::istream& in);
RuleSet load_rules_file(const std::string& path);

/// The rule file shipped with the engine (compiled in from rules/default.rules).
std::string_view default_rules_text();
RuleSet default_rules();

NormalizedCommand normalize_command(std::string_view command_line);

bool token_matches(std::string_view pattern, std::string_view token);

/// Index of the first rule (file order) matching the normalized command.
std::optional<std::size_t> match_normalized(const RuleSet& rules, const NormalizedCommand& cmd);

/// Only Process/Start events are inspected.
std::optional<Alert> match_command(const RuleSet& rules, const Event& e);

}  // namespace peeler
