#pragma once

#include <vector>

#include "vertfl/fl_types.hpp"

namespace vertfl {

enum class AggregatorKind { FedAvg, Krum, MultiKrum, Median, TrimmedMean };

const char* to_string(AggregatorKind k);

// Arithmetic mean of the inputs. Throws on empty or mismatched lengths.
GradientVector fedavg(const std::vector<GradientVector>& grads);

// Krum score of gradient i: sum of its n-f-2 smallest squared distances to
// the other gradients (neighbor count clamped to >= 1). Returns the argmin
// gradient; ties break toward the lowest owner id.
GradientVector krum(const std::vector<GradientVector>& grads, int f);

// Iteratively pick-and-remove the Krum winner m_sel times, then average.
GradientVector multi_krum(const std::vector<GradientVector>& grads, int f,
                          int m_sel);

// Coordinatewise median; even counts average the two middle values.
GradientVector median(const std::vector<GradientVector>& grads);

// Per coordinate, drop `trim` largest and `trim` smallest, average the rest.
GradientVector trimmed_mean(const std::vector<GradientVector>& grads, int trim);

// Dispatch used for VERT successive aggregation and baseline defenses.
GradientVector aggregate(AggregatorKind kind,
                         const std::vector<GradientVector>& grads, int f,
                         int m_sel = 0, int trim = 0);

}  // namespace vertfl
