#pragma once

#include <vector>

namespace latdiff {

// CDF of Student's t with nu degrees of freedom, via the regularized
// incomplete beta function.
double student_t_cdf(double t, double nu);

// One-sided Welch two-sample test of mean(a) > mean(b): Welch t statistic,
// Welch-Satterthwaite degrees of freedom, p = 1 - CDF. When both samples
// have zero variance: equal means give p = 0.5, otherwise p is 0 or 1 by
// sign. Throws TooFewSamples below 2 entries per list.
double significance(const std::vector<double>& scores_a,
                    const std::vector<double>& scores_b);

}  // namespace latdiff
