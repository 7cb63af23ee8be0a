#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wattmine/event_detect.hpp"
#include "wattmine/micro_moment.hpp"

namespace wattmine {

/// Threshold predicate shared by the miner and its oracles: supports are kept
/// as exact integer counts and only compared against the fractional threshold
/// here, so the boundary decision is made in exactly one place.
inline bool fraction_at_least(std::uint64_t numerator, std::uint64_t denominator,
                              double threshold) {
    return static_cast<long double>(numerator) >=
           static_cast<long double>(threshold) * static_cast<long double>(denominator) -
               1e-9L;
}

struct ItemSet {
    std::vector<std::string> items;  // sorted
    std::uint64_t contain_count = 0;
    std::uint64_t total_count = 0;

    double support() const {
        return static_cast<double>(contain_count) / static_cast<double>(total_count);
    }
};

struct FrequentItemsets {
    std::vector<ItemSet> sets;  // sorted by (size, lexical items)
    std::uint64_t total_transactions = 0;
};

struct AssociationRule {
    std::vector<std::string> antecedent;  // sorted
    std::vector<std::string> consequent;  // sorted, disjoint from antecedent
    std::uint64_t antecedent_count = 0;
    std::uint64_t joint_count = 0;
    std::uint64_t total_count = 0;

    double support() const {
        return static_cast<double>(joint_count) / static_cast<double>(total_count);
    }
    double confidence() const {
        return static_cast<double>(joint_count) / static_cast<double>(antecedent_count);
    }
};

struct HabitRule {
    AssociationRule rule;
    std::string device_id;  // empty when no device item appears anywhere
    SwitchAction action = SwitchAction::on;

    /// Value of an antecedent key ("hour", "day", "occ", ...), or empty.
    std::string antecedent_value(const std::string& key) const;
};

/// Level-wise Apriori with candidate pruning by the anti-monotone property.
/// Returns exactly the itemsets whose support meets min_support; transactions
/// are a multiset, duplicates count.
FrequentItemsets frequent_itemsets(const std::vector<Transaction>& transactions,
                                   double min_support);

/// Every (antecedent -> complement) split of every frequent itemset of size
/// >= 2 whose confidence meets min_confidence. Confidence is computed from
/// the stored supports only.
std::vector<AssociationRule> generate_rules(const FrequentItemsets& itemsets,
                                            double min_confidence);

/// Keeps the rules whose consequent is exactly one action item, optionally
/// plus the device item when the antecedent lacks one. Sorted by confidence,
/// then support, descending.
std::vector<HabitRule> extract_habits(const std::vector<AssociationRule>& rules);

/// "antecedent_items|consequent_items|support|confidence", items ";"-joined.
std::string serialize_rules(const std::vector<AssociationRule>& rules);
std::string serialize_habits(const std::vector<HabitRule>& habits);
std::vector<HabitRule> parse_habits(std::istream& in);
std::vector<HabitRule> parse_habits_file(const std::string& path);

std::string serialize_itemsets(const FrequentItemsets& itemsets);

}  // namespace wattmine
