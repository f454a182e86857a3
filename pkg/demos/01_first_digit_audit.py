"""
Auditing case counts with the first-digit law
=============================================

Daily cumulative totals from a steadily growing outbreak spread their
leading digits logarithmically: digit 1 leads about 30.1% of the time,
digit 9 only 4.6%.  Numbers invented by hand rarely respect that shape,
which makes the first-digit distribution a cheap screen for reporting
problems.  This demo audits one well-behaved series and one that is not.
"""
import numpy as np

from episignal.benford import (
    analyze_values,
    benford_pmf,
    chi_square,
    digit_histogram,
    ks_statistic,
    mad,
    mantissa_stats,
)
from episignal.dataset import Period

# The reference distribution itself: P(d) = log10(1 + 1/d).
pmf = benford_pmf()
for digit, p in enumerate(pmf, start=1):
    print(f"digit {digit}: {p:6.3%}")

# A cumulative series growing 10% per day for four months.  Exponential
# growth cycles its significand through every decade, so it conforms.
days = np.arange(120)
cumulative = 100.0 * 1.10 ** days

hist = digit_histogram(cumulative)
chi2, chi2_ok = chi_square(hist)
ks, ks_ok = ks_statistic(hist)
deviation, band = mad(hist)
print(f"\ngrowth series: chi2={chi2:.2f} (pass={chi2_ok}), "
      f"ks={ks:.4f} (pass={ks_ok}), mad={deviation:.4f} [{band.value}]")

# The mantissa check: conforming data has frac(log10(x)) uniform on
# [0, 1), so its mean sits near one half.
mean, n = mantissa_stats(cumulative)
print(f"mantissa mean over {n} values: {mean:.4f} (ideal 0.500)")

# Now a fabricated series whose values were drawn uniformly between 1
# and 9999 — every first digit is about equally likely, which is far
# from logarithmic.
fake = np.random.default_rng(7).uniform(1, 9999, size=1000)
chi2, chi2_ok = chi_square(digit_histogram(fake))
print(f"\nuniform series: chi2={chi2:.1f} (pass={chi2_ok})")

# analyze_values bundles every statistic for a reporting window.
report = analyze_values(cumulative, Period.parse("2020-03-01..2020-06-28"))
print(f"\nwindow report: n={report.n}, chi2_pass={report.chi2_pass}, "
      f"ks_pass={report.ks_pass}, mad_band={report.mad_band.value}, "
      f"mantissa_mean={report.mantissa_mean:.3f}")
