#pragma once

#include <cmath>

// Shared GELU math: the standard-normal CDF Phi and pdf, built from one
// branchless exp(-x^2/2) plus two minimax polynomials (fitted offline with
// a Remez exchange; max fit error 2.4e-19 small branch, 9.2e-17 big). The
// scalar forms below are the semantic definition; the AVX2 backend mirrors
// them operation for operation (same fma/mul/add order), so the two
// backends agree bitwise on finite inputs. That matters: GELU sits on the
// innermost hot path, and a looser contract here would smear every
// equivalence bound downstream.
//
// The small/big split sits at |x| = 2 so that layer-normalized activations
// land in the small branch ~95% of the time per lane; the small branch of
// the CDF needs no exponential at all, which is what makes the cdf-only
// path (used by the no-tape forward) cheap.
//
// exp core: Cody-Waite reduction x = n*ln2 + r (20-bit exact chunk plus
// tail), degree-13 polynomial in r evaluated by Estrin's scheme, scaling by
// 2^n split into two halves so gradual under/overflow falls out of the
// multiplies.

namespace sorl::kernels::detail {

inline constexpr double kExpCW1 = 0.69314670562744140625;  // 726817 / 2^20, exact
inline constexpr double kExpCW2 = 4.749325039031672321214582e-7;
inline constexpr double kLog2E = 1.442695040888963407359925;

inline constexpr double kExpPoly[14] = {
    1.0,
    1.0,
    0.5,
    0.16666666666666666667,
    0.041666666666666666667,
    0.0083333333333333333333,
    0.0013888888888888888889,
    0.00019841269841269841270,
    0.000024801587301587301587,
    0.0000027557319223985890653,
    2.7557319223985890653e-7,
    2.5052108385441718775e-8,
    2.0876756987868098979e-9,
    1.6059043836821614599e-10,
};

// (Phi(x) - 1/2)/x in u = x^2, u in [0, 4]
inline constexpr double kPhiSmall[15] = {
    0.3989422804014326777013,
    -0.06649038006690541926157,
    0.009973557010035307691232,
    -0.001187328215476671091841,
    0.0001154346876014300317045,
    -0.00000944465622496606476038,
    6.659692987079672785297e-7,
    -4.122661845979149314443e-8,
    2.273488330452384058647e-9,
    -1.129894446748395576964e-10,
    5.103771527800431827615e-12,
    -2.097458946028233225657e-13,
    7.650241732078439329969e-15,
    -2.238561266873179459532e-16,
    3.845326006474053641976e-18,
};

// W(z) = Phi(-z) * exp(z^2/2) in s = (z - 5.375)/3.375, z in [2, 8.75]
inline constexpr double kPhiBig[25] = {
    0.0718819888604808298551,
    -0.04244599218267376994862,
    0.02439197621251863616109,
    -0.01366689540867481223033,
    0.007478457382275262658021,
    -0.004002117907746351569389,
    0.002097230542036823052459,
    -0.001077364573428636061127,
    0.0005430878457983884003397,
    -0.0002688774863077635029356,
    0.0001308481519389938328603,
    -0.00006264085748251024884262,
    0.00002951761076414113083836,
    -0.0000136860012882511330673,
    0.000006255962123605283755947,
    -0.000002849524501469236343248,
    0.000001273080234516622568227,
    -5.171729080410062945364e-7,
    2.186356273114597735185e-7,
    -1.347672779932035811375e-7,
    6.063636479998705072611e-8,
    5.677848201512176261516e-10,
    -1.589189721012622350411e-9,
    -8.796454645445369752814e-9,
    3.781237503729121609305e-9,
};

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kSplit = 2.0;
inline constexpr double kBigScale = 1.0 / 3.375;  // not exact; mirrored by the vector path
inline constexpr double kBigShift = 5.375;
inline constexpr double kZClamp = 8.75;

inline double pow2i_scalar(double n) {
  // n holds an integral double; builds 2^n by exponent-field assembly.
  const long long e = (static_cast<long long>(n) + 1023) << 52;
  double r;
  __builtin_memcpy(&r, &e, sizeof r);
  return r;
}

inline double exp_core(double x) {
  const double orig = x;
  x = std::fmin(std::fmax(x, -746.0), 710.0);

  const double n = std::nearbyint(x * kLog2E);
  double r = std::fma(-n, kExpCW1, x);
  r = std::fma(-n, kExpCW2, r);

  // Estrin over the degree-13 polynomial
  const double r2 = r * r;
  const double r4 = r2 * r2;
  const double r8 = r4 * r4;
  const double q0 = std::fma(kExpPoly[1], r, kExpPoly[0]);
  const double q1 = std::fma(kExpPoly[3], r, kExpPoly[2]);
  const double q2 = std::fma(kExpPoly[5], r, kExpPoly[4]);
  const double q3 = std::fma(kExpPoly[7], r, kExpPoly[6]);
  const double q4 = std::fma(kExpPoly[9], r, kExpPoly[8]);
  const double q5 = std::fma(kExpPoly[11], r, kExpPoly[10]);
  const double q6 = std::fma(kExpPoly[13], r, kExpPoly[12]);
  const double t0 = std::fma(q1, r2, q0);
  const double t1 = std::fma(q3, r2, q2);
  const double t2 = std::fma(q5, r2, q4);
  const double t3 = q6;
  const double u0 = std::fma(t1, r4, t0);
  const double u1 = std::fma(t3, r4, t2);
  double p = std::fma(u1, r8, u0);

  const double n1 = std::nearbyint(n * 0.5);
  const double n2 = n - n1;
  p = (p * pow2i_scalar(n1)) * pow2i_scalar(n2);

  if (orig < -746.0) p = 0.0;
  if (orig > 710.0) p = HUGE_VAL;
  if (orig != orig) p = orig;
  return p;
}

// small-branch CDF: Phi(x) = x * P(x^2) + 1/2, valid for x^2 <= 4
inline double phi_small(double x, double u) {
  const double u2 = u * u;
  const double u4 = u2 * u2;
  const double u8 = u4 * u4;
  const double q0 = std::fma(kPhiSmall[1], u, kPhiSmall[0]);
  const double q1 = std::fma(kPhiSmall[3], u, kPhiSmall[2]);
  const double q2 = std::fma(kPhiSmall[5], u, kPhiSmall[4]);
  const double q3 = std::fma(kPhiSmall[7], u, kPhiSmall[6]);
  const double q4 = std::fma(kPhiSmall[9], u, kPhiSmall[8]);
  const double q5 = std::fma(kPhiSmall[11], u, kPhiSmall[10]);
  const double q6 = std::fma(kPhiSmall[13], u, kPhiSmall[12]);
  const double q7 = kPhiSmall[14];
  const double t0 = std::fma(q1, u2, q0);
  const double t1 = std::fma(q3, u2, q2);
  const double t2 = std::fma(q5, u2, q4);
  const double t3 = std::fma(q7, u2, q6);
  const double u0 = std::fma(t1, u4, t0);
  const double u1 = std::fma(t3, u4, t2);
  const double pv = std::fma(u1, u8, u0);
  return std::fma(x, pv, 0.5);
}

// big-branch CDF given z = |x| >= 2 and e = exp(-x^2/2)
inline double phi_big(double x, double z, double e) {
  const double zc = z < kZClamp ? z : kZClamp;
  const double s = (zc - kBigShift) * kBigScale;
  const double s2 = s * s;
  const double s4 = s2 * s2;
  const double s8 = s4 * s4;
  const double s16 = s8 * s8;
  const double q0 = std::fma(kPhiBig[1], s, kPhiBig[0]);
  const double q1 = std::fma(kPhiBig[3], s, kPhiBig[2]);
  const double q2 = std::fma(kPhiBig[5], s, kPhiBig[4]);
  const double q3 = std::fma(kPhiBig[7], s, kPhiBig[6]);
  const double q4 = std::fma(kPhiBig[9], s, kPhiBig[8]);
  const double q5 = std::fma(kPhiBig[11], s, kPhiBig[10]);
  const double q6 = std::fma(kPhiBig[13], s, kPhiBig[12]);
  const double q7 = std::fma(kPhiBig[15], s, kPhiBig[14]);
  const double q8 = std::fma(kPhiBig[17], s, kPhiBig[16]);
  const double q9 = std::fma(kPhiBig[19], s, kPhiBig[18]);
  const double q10 = std::fma(kPhiBig[21], s, kPhiBig[20]);
  const double q11 = std::fma(kPhiBig[23], s, kPhiBig[22]);
  const double q12 = kPhiBig[24];
  const double t0 = std::fma(q1, s2, q0);
  const double t1 = std::fma(q3, s2, q2);
  const double t2 = std::fma(q5, s2, q4);
  const double t3 = std::fma(q7, s2, q6);
  const double t4 = std::fma(q9, s2, q8);
  const double t5 = std::fma(q11, s2, q10);
  const double t6 = q12;
  const double v0 = std::fma(t1, s4, t0);
  const double v1 = std::fma(t3, s4, t2);
  const double v2 = std::fma(t5, s4, t4);
  const double v3 = t6;
  const double w0 = std::fma(v1, s8, v0);
  const double w1 = std::fma(v3, s8, v2);
  const double wv = std::fma(w1, s16, w0);
  const double tail = e * wv;  // Phi(-z)
  return x < 0.0 ? tail : 1.0 - tail;
}

// Phi(x) and the pdf phi(x) in one pass; the tape forward needs both.
inline void phi_pdf(double x, double& cdf, double& pdf) {
  const double u = x * x;
  const double e = exp_core(-0.5 * u);
  pdf = kInvSqrt2Pi * e;
  const double z = std::fabs(x);
  cdf = z < kSplit ? phi_small(x, u) : phi_big(x, z, e);
}

// Phi(x) alone; skips the exponential entirely in the small branch.
inline double phi_cdf(double x) {
  const double u = x * x;
  const double z = std::fabs(x);
  if (z < kSplit) return phi_small(x, u);
  return phi_big(x, z, exp_core(-0.5 * u));
}

}  // namespace sorl::kernels::detail
