"""Reference values frozen into tests/unit/oracles.hpp.

Independent of the C++ code: scipy for the t distribution, plain Python for
the rest. Re-run and compare if an oracle is ever in doubt.
"""
import math
import statistics

from scipy import stats

# Paired t-test, a = [1, 2, 3], b = [0, 0, 0].
a, b = [1, 2, 3], [0, 0, 0]
res = stats.ttest_rel(a, b)
print(f"paired_t      = {res.statistic!r}")
print(f"paired_p      = {res.pvalue!r}")
# df = 2 closed form: p = 1 - t / sqrt(t^2 + 2)
t = 2 * math.sqrt(3)
print(f"paired_p_df2  = {1 - t / math.sqrt(t * t + 2)!r}")

# Student-t CDF spot values.
for tt, df in [(0.5, 1), (1.0, 3), (-2.0, 4), (2.5, 10), (3.0, 30)]:
    print(f"t_cdf({tt}, {df}) = {stats.t.cdf(tt, df)!r}")

# Sample standard deviation with n - 1.
print(f"std_3         = {statistics.stdev([0.88, 0.90, 0.92])!r}")

# Binary cross-entropy at p = 0.5.
print(f"log2          = {math.log(2)!r}")

# F1 with TP=2, FP=1, FN=1.
p = r = 2 / 3
print(f"f1_2_1_1      = {2 * p * r / (p + r)!r}")

# Fold sizes for 1573 ids over 5 folds.
print("fold_sizes    =", [1573 // 5 + (1 if i < 1573 % 5 else 0) for i in range(5)])
