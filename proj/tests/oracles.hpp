#pragma once

// Frozen analytic constants used as test oracles. Each value was derived by
// hand (or checked against quadrature) before the implementation existed.
namespace oracle {

// exp(-1/2): 1-D derivative feature at unit offset, unit bandwidth.
inline constexpr double kFeat1d = 0.6065306597126334;

// -2 exp(-1/2): 1-D diagonal second derivative at unit offset, unit bandwidth.
inline constexpr double kLap1d = -1.2130613194252668;

// Parameter count of dims {5, 100, 50, 3}:
// 5*100+100 + 100*50+50 + 50*3+3.
inline constexpr long kParamCount5_100_50_3 = 5803;

// Median of |Z|, Z ~ N(0, 2): sqrt(2) * Phi^{-1}(3/4).
inline constexpr double kMedianPairwiseStdNormal = 0.9538725524087805;

// log(2 pi) and its half (Gaussian log-partition).
inline constexpr double kLogTwoPi = 1.8378770664093453;
inline constexpr double kHalfLogTwoPi = 0.9189385332046727;

// Mean conditional log-likelihood of y|x ~ N(m(x), 0.5^2):
// -log(0.5 sqrt(2 pi)) - 1/2.
inline constexpr double kToyCondLoglik = -0.7257913526447274;

// RMSprop update from zero state, g = 4, decay 0.9, lr 0.1, eps 0:
// -0.1 * 4 / sqrt(1.6) = -sqrt(0.1).
inline constexpr double kRmspropStep = -0.31622776601683794;

// log(1/3) - log(0.25 sqrt(2 pi)): far-separated mixture component hit.
inline constexpr double kMixtureHitLoglik = -0.6312564607528919;

// log(1/(0.25 sqrt(2 pi))): collapsed mixture at its mean.
inline constexpr double kMixtureCollapsedLoglik = 0.4673558279152179;

}  // namespace oracle
