"""
Sharpe versus the Market-adaptive Ratio
=======================================

Walk along the family of portfolios whose Sharpe ratio is exactly one
(excess return equal to volatility) and watch how the regime coefficient
bends the Market-adaptive Ratio up in a bull market and down in a bear one.
"""

import numpy as np

from marketadaptive import market_adaptive_ratio, rho, sharpe

alpha = 5.0
bull, bear = rho(0.10, alpha), rho(-0.10, alpha)
print(f"rho after a +10% month: {bull:.4f}")
print(f"rho after a -10% month: {bear:.4f}")

# every row has sharpe 1.0; only the ratio reacts to the size of the bet
print(f"\n{'sigma':>6} {'sharpe':>7} {'bull':>8} {'bear':>8}")
for sigma in np.linspace(1, 8, 8):
    mu = sigma
    print(f"{sigma:6.1f} {sharpe(mu, 0, sigma):7.3f} "
          f"{market_adaptive_ratio(mu, 0, sigma, bull):8.3f} "
          f"{market_adaptive_ratio(mu, 0, sigma, bear):8.3f}")

###############################################################################
# A flat regime gives rho = 1 and the ratio collapses back to Sharpe.

print("\nflat regime:", market_adaptive_ratio(0.07, 0.01, 0.2, rho(0.0, alpha)), sharpe(0.07, 0.01, 0.2))
