#pragma once

#include <vector>

#include "fatality/analytics.hpp"

namespace fatality::testing {

// Frozen from tests/oracles/analytics_oracle.py over the deduplicated fixture.
inline const std::vector<analytics::WordCount> kFatalTop10 = {
    {"killed", 18}, {"taliban", 16}, {"fighters", 9}, {"forces", 8}, {"district", 7},
    {"nrf", 7},     {"city", 5},     {"kabul", 4},    {"gunmen", 3}, {"members", 3}};
inline const std::vector<analytics::WordCount> kNonFatalTop10 = {
    {"taliban", 17},  {"forces", 12},    {"city", 6},       {"district", 6}, {"kabul", 5},
    {"reported", 5},  {"arrested", 4},   {"casualties", 4}, {"kandahar", 3}, {"nrf", 3}};
inline const std::vector<analytics::WordCount> kCloudHead = {
    {"taliban", 33}, {"forces", 20}, {"killed", 18},  {"district", 13},
    {"city", 11},    {"fighters", 10}, {"nrf", 10},   {"kabul", 9},
    {"panjshir", 6}, {"reported", 6},  {"kandahar", 5}, {"arrested", 4}};

}  // namespace fatality::testing
