#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace dbmm {

using SymbolId = std::int32_t;

inline constexpr SymbolId kNoSymbol = -1;
// Placeholder output aligned with beta-inputs in sample sets. Never
// interned and never part of any output alphabet.
inline constexpr SymbolId kBetaDefault = -2;

// A symbol is an ordered tuple of string parts. One part for plain
// observations, actions, rewards and propositions; two parts for an
// (observation, action) pair or an observation augmented with a machine
// state; label sets use one part per proposition (sorted, possibly none).
struct SymbolKey {
    std::vector<std::string> parts;

    bool operator==(const SymbolKey&) const = default;
    bool operator<(const SymbolKey& other) const { return parts < other.parts; }

    std::string display() const;  // human-readable, for logs and DOT
};

struct SymbolKeyHash {
    std::size_t operator()(const SymbolKey& k) const;
};

// Interns symbol keys into dense ids. Ids are stable for the lifetime of
// the table; everything produced within one pipeline run shares a table.
class SymbolTable {
public:
    SymbolId intern(SymbolKey key);
    SymbolId intern(std::string single_part);
    SymbolId intern_pair(const std::string& a, const std::string& b);

    // Returns kNoSymbol when the key was never interned.
    SymbolId find(const SymbolKey& key) const;

    const SymbolKey& key(SymbolId id) const;
    std::size_t size() const { return keys_.size(); }

private:
    std::vector<SymbolKey> keys_;
    std::unordered_map<SymbolKey, SymbolId, SymbolKeyHash> index_;
};

using SymbolTablePtr = std::shared_ptr<SymbolTable>;

// Canonical decimal form used for reward outputs: "-0" -> "0", "1.50" ->
// "1.5", "01" -> "1", exponents expanded. Throws DataError on anything
// that is not a plain decimal number.
std::string normalize_decimal(const std::string& text);

}  // namespace dbmm
