#include "wattmine/habit_mine.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "wattmine/errors.hpp"

namespace wattmine {

namespace {

using Items = std::vector<std::string>;

bool contains_all(const Items& transaction, const Items& sorted_subset) {
    return std::includes(transaction.begin(), transaction.end(), sorted_subset.begin(),
                         sorted_subset.end());
}

std::string join(const Items& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += sep;
        out += items[i];
    }
    return out;
}

std::string format_fraction(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::string value_of(const Items& items, const std::string& key) {
    const std::string prefix = key + ":";
    for (const std::string& item : items) {
        if (item.rfind(prefix, 0) == 0) return item.substr(prefix.size());
    }
    return {};
}

}  // namespace

std::string HabitRule::antecedent_value(const std::string& key) const {
    return value_of(rule.antecedent, key);
}

FrequentItemsets frequent_itemsets(const std::vector<Transaction>& transactions,
                                   double min_support) {
    if (transactions.empty()) throw ParameterError("frequent_itemsets: no transactions");
    if (!(min_support > 0.0 && min_support <= 1.0)) {
        throw ParameterError("frequent_itemsets: min_support must be in (0,1]");
    }

    FrequentItemsets out;
    out.total_transactions = transactions.size();
    const std::uint64_t total = out.total_transactions;

    std::map<Items, std::uint64_t> counts;
    for (const Transaction& t : transactions) {
        for (const std::string& item : t.items) ++counts[{item}];
    }
    std::vector<Items> level;
    for (const auto& [items, count] : counts) {
        if (fraction_at_least(count, total, min_support)) {
            out.sets.push_back({items, count, total});
            level.push_back(items);
        }
    }

    while (!level.empty()) {
        // Join step: extend itemsets that share all but their last item.
        std::vector<Items> candidates;
        for (std::size_t i = 0; i < level.size(); ++i) {
            for (std::size_t j = i + 1; j < level.size(); ++j) {
                if (!std::equal(level[i].begin(), level[i].end() - 1, level[j].begin(),
                                level[j].end() - 1)) {
                    break;  // level is sorted, prefixes only get further apart
                }
                Items candidate(level[i]);
                candidate.push_back(level[j].back());

                // Prune step: every (k-1)-subset must itself be frequent.
                bool all_frequent = true;
                Items subset(candidate.begin() + 1, candidate.end());
                for (std::size_t drop = 0; drop < candidate.size() && all_frequent; ++drop) {
                    if (!std::binary_search(level.begin(), level.end(), subset)) {
                        all_frequent = false;
                    }
                    if (drop < subset.size()) subset[drop] = candidate[drop];
                }
                if (all_frequent) candidates.push_back(std::move(candidate));
            }
        }
        if (candidates.empty()) break;

        std::map<Items, std::uint64_t> candidate_counts;
        for (const Transaction& t : transactions) {
            for (const Items& candidate : candidates) {
                if (contains_all(t.items, candidate)) ++candidate_counts[candidate];
            }
        }
        level.clear();
        for (const Items& candidate : candidates) {
            const auto it = candidate_counts.find(candidate);
            const std::uint64_t count = it == candidate_counts.end() ? 0 : it->second;
            if (fraction_at_least(count, total, min_support)) {
                out.sets.push_back({candidate, count, total});
                level.push_back(candidate);
            }
        }
    }

    std::sort(out.sets.begin(), out.sets.end(), [](const ItemSet& a, const ItemSet& b) {
        if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
        return a.items < b.items;
    });
    return out;
}

std::vector<AssociationRule> generate_rules(const FrequentItemsets& itemsets,
                                            double min_confidence) {
    std::map<Items, std::uint64_t> support;
    for (const ItemSet& set : itemsets.sets) support[set.items] = set.contain_count;

    std::vector<AssociationRule> out;
    for (const ItemSet& set : itemsets.sets) {
        const std::size_t n = set.items.size();
        if (n < 2) continue;
        for (std::uint64_t mask = 1; mask + 1 < (1ULL << n); ++mask) {
            AssociationRule rule;
            for (std::size_t bit = 0; bit < n; ++bit) {
                if (mask & (1ULL << bit)) {
                    rule.antecedent.push_back(set.items[bit]);
                } else {
                    rule.consequent.push_back(set.items[bit]);
                }
            }
            const auto it = support.find(rule.antecedent);
            if (it == support.end()) {
                throw std::logic_error("generate_rules: no stored support for subset {" +
                                       join(rule.antecedent, ',') + "}");
            }
            rule.antecedent_count = it->second;
            rule.joint_count = set.contain_count;
            rule.total_count = itemsets.total_transactions;
            if (fraction_at_least(rule.joint_count, rule.antecedent_count, min_confidence)) {
                out.push_back(std::move(rule));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const AssociationRule& a, const AssociationRule& b) {
        if (a.antecedent != b.antecedent) return a.antecedent < b.antecedent;
        return a.consequent < b.consequent;
    });
    return out;
}

std::vector<HabitRule> extract_habits(const std::vector<AssociationRule>& rules) {
    std::vector<HabitRule> out;
    for (const AssociationRule& rule : rules) {
        std::string action_value;
        std::string device_value;
        bool other = false;
        for (const std::string& item : rule.consequent) {
            if (item.rfind("action:", 0) == 0 && action_value.empty()) {
                action_value = item.substr(7);
            } else if (item.rfind("device:", 0) == 0 && device_value.empty()) {
                device_value = item.substr(7);
            } else {
                other = true;
            }
        }
        if (other || action_value.empty()) continue;
        const std::string antecedent_device = value_of(rule.antecedent, "device");
        if (!device_value.empty() && !antecedent_device.empty()) continue;

        HabitRule habit;
        habit.rule = rule;
        habit.device_id = !device_value.empty() ? device_value : antecedent_device;
        habit.action = action_value == "on" ? SwitchAction::on : SwitchAction::off;
        out.push_back(std::move(habit));
    }
    std::sort(out.begin(), out.end(), [](const HabitRule& a, const HabitRule& b) {
        const double ca = a.rule.confidence(), cb = b.rule.confidence();
        if (ca != cb) return ca > cb;
        const double sa = a.rule.support(), sb = b.rule.support();
        if (sa != sb) return sa > sb;
        if (a.rule.antecedent != b.rule.antecedent) return a.rule.antecedent < b.rule.antecedent;
        return a.rule.consequent < b.rule.consequent;
    });
    return out;
}

std::string serialize_rules(const std::vector<AssociationRule>& rules) {
    std::ostringstream out;
    for (const AssociationRule& rule : rules) {
        out << join(rule.antecedent, ';') << '|' << join(rule.consequent, ';') << '|'
            << format_fraction(rule.support()) << '|' << format_fraction(rule.confidence())
            << '\n';
    }
    return out.str();
}

std::string serialize_habits(const std::vector<HabitRule>& habits) {
    std::ostringstream out;
    for (const HabitRule& habit : habits) {
        out << join(habit.rule.antecedent, ';') << '|' << join(habit.rule.consequent, ';')
            << '|' << format_fraction(habit.rule.support()) << '|'
            << format_fraction(habit.rule.confidence()) << '\n';
    }
    return out.str();
}

std::vector<HabitRule> parse_habits(std::istream& in) {
    std::vector<HabitRule> out;
    std::string line;
    std::size_t line_number = 0;
    const auto split_items = [](const std::string& field) {
        Items items;
        std::size_t begin = 0;
        while (begin <= field.size() && !field.empty()) {
            const std::size_t pos = field.find(';', begin);
            if (pos == std::string::npos) {
                items.push_back(field.substr(begin));
                break;
            }
            items.push_back(field.substr(begin, pos - begin));
            begin = pos + 1;
        }
        return items;
    };
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t begin = 0;
        for (int i = 0; i < 3; ++i) {
            const std::size_t pos = line.find('|', begin);
            if (pos == std::string::npos) {
                throw DataError("habits line " + std::to_string(line_number) +
                                ": expected 4 |-separated fields");
            }
            fields.push_back(line.substr(begin, pos - begin));
            begin = pos + 1;
        }
        fields.push_back(line.substr(begin));

        HabitRule habit;
        habit.rule.antecedent = split_items(fields[0]);
        habit.rule.consequent = split_items(fields[1]);
        // Reconstruct counts on a nominal denominator so support/confidence
        // round-trip within the serialized precision.
        const double support = std::stod(fields[2]);
        const double confidence = std::stod(fields[3]);
        constexpr std::uint64_t kScale = 1000000;
        habit.rule.total_count = kScale;
        habit.rule.joint_count = static_cast<std::uint64_t>(support * kScale + 0.5);
        habit.rule.antecedent_count =
            confidence > 0.0
                ? static_cast<std::uint64_t>(support * kScale / confidence + 0.5)
                : kScale;
        const std::string action_value = value_of(habit.rule.consequent, "action");
        if (action_value.empty()) {
            throw DataError("habits line " + std::to_string(line_number) +
                            ": consequent lacks an action item");
        }
        habit.action = action_value == "on" ? SwitchAction::on : SwitchAction::off;
        habit.device_id = value_of(habit.rule.consequent, "device");
        if (habit.device_id.empty()) habit.device_id = value_of(habit.rule.antecedent, "device");
        out.push_back(std::move(habit));
    }
    return out;
}

std::vector<HabitRule> parse_habits_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read habits file '" + path + "'");
    return parse_habits(in);
}

std::string serialize_itemsets(const FrequentItemsets& itemsets) {
    std::ostringstream out;
    for (const ItemSet& set : itemsets.sets) {
        out << join(set.items, ';') << '|' << format_fraction(set.support()) << '\n';
    }
    return out.str();
}

}  // namespace wattmine
