"""What a constant-envelope constraint costs relative to tuned RZF.

Prints the extra antennas and the extra SNR a per-antenna constant-envelope
precoder needs to match the rate bound of tuned RZF at load 5.
"""

from lse_lab.constellations import Circle
from lse_lab.experiments import antenna_gap, snr_gap_db, tune_constellation, tune_rzf

alpha, q, sigma_n2 = 5.0, 1.0, 1.0
rzf = tune_rzf(alpha, q, sigma_n2)
ce = tune_constellation(Circle(1.0), alpha, q, sigma_n2)
print(f"tuned RZF:         rate bound {rzf.rate_bound:.4f} bit, lambda {rzf.lambda_opt:.4f}")
print(f"constant envelope: rate bound {ce.rate_bound:.4f} bit")
print(f"extra antennas:    {100 * antenna_gap(Circle(1.0), alpha, q, sigma_n2):.1f} %")
print(f"extra SNR:         {snr_gap_db(Circle(1.0), alpha, q, sigma_n2):.2f} dB")
