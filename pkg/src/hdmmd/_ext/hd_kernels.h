/*
 * Blocked inner products and isotropic-kernel row sums.
 *
 * Every dot product is accumulated in LANES independent partial sums
 * (lane = k mod LANES) that are combined in a fixed tree at the end.  The
 * arithmetic per output element is the same no matter which tile, thread or
 * operand order produced it, so results are bit-identical across thread
 * counts and dot(a, b) == dot(b, a).  Build with -ffp-contract=off: FMA
 * contraction in some code paths but not others would break that.
 */
#ifndef HD_KERNELS_H
#define HD_KERNELS_H

#include <math.h>
#include <stddef.h>

#define HD_LANES 8
#define HD_TILE 4

enum hd_family {
    HD_GAUSSIAN = 0,
    HD_LAPLACE = 1,
    HD_RQ = 2,
    HD_ENERGY = 3,
    HD_LINEAR = 4
};

static inline double hd_combine(const double *acc)
{
    double s01 = acc[0] + acc[1];
    double s23 = acc[2] + acc[3];
    double s45 = acc[4] + acc[5];
    double s67 = acc[6] + acc[7];
    return (s01 + s23) + (s45 + s67);
}

/* Rows of A kept hot in cache while B tiles stream past them (gram blocking). */
#define HD_BLOCK_ROWS 64

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

/* out[a * ldo + b] = <A_a, B_b> for a < na, b < nb (na, nb <= HD_TILE). */
static inline void hd_dot_tile(const double *A, ptrdiff_t lda, int na,
                               const double *B, ptrdiff_t ldb, int nb,
                               ptrdiff_t p, double *out, ptrdiff_t ldo)
{
    double acc[HD_TILE][HD_TILE][HD_LANES];
    const double *ra[HD_TILE];
    const double *rb[HD_TILE];
    ptrdiff_t k, kmain = p - p % HD_LANES;
    int a, b, l;

    /* Padding rows duplicate row 0 and are discarded, keeping the hot loop
     * branch-free with a fixed 4x4 shape. */
    for (a = 0; a < HD_TILE; a++) {
        ra[a] = A + (ptrdiff_t)(a < na ? a : 0) * lda;
        rb[a] = B + (ptrdiff_t)(a < nb ? a : 0) * ldb;
    }
#if defined(__AVX512F__) && HD_TILE == 4 && HD_LANES == 8
    {
        /* One 8-wide register per (a, b) pair holds the eight lanes.  Plain
         * multiply then add (no FMA), so the bits match the portable loop. */
        __m512d c[4][4], x0, x1, x2, x3, y;
        for (a = 0; a < 4; a++)
            for (b = 0; b < 4; b++)
                c[a][b] = _mm512_setzero_pd();
        for (k = 0; k < kmain; k += 8) {
            x0 = _mm512_loadu_pd(ra[0] + k);
            x1 = _mm512_loadu_pd(ra[1] + k);
            x2 = _mm512_loadu_pd(ra[2] + k);
            x3 = _mm512_loadu_pd(ra[3] + k);
            for (b = 0; b < 4; b++) {
                y = _mm512_loadu_pd(rb[b] + k);
                c[0][b] = _mm512_add_pd(c[0][b], _mm512_mul_pd(x0, y));
                c[1][b] = _mm512_add_pd(c[1][b], _mm512_mul_pd(x1, y));
                c[2][b] = _mm512_add_pd(c[2][b], _mm512_mul_pd(x2, y));
                c[3][b] = _mm512_add_pd(c[3][b], _mm512_mul_pd(x3, y));
            }
        }
        for (a = 0; a < 4; a++)
            for (b = 0; b < 4; b++)
                _mm512_storeu_pd(acc[a][b], c[a][b]);
    }
#else
    for (a = 0; a < HD_TILE; a++)
        for (b = 0; b < HD_TILE; b++)
            for (l = 0; l < HD_LANES; l++)
                acc[a][b][l] = 0.0;
    for (k = 0; k < kmain; k += HD_LANES) {
        for (a = 0; a < HD_TILE; a++) {
            for (b = 0; b < HD_TILE; b++) {
                for (l = 0; l < HD_LANES; l++)
                    acc[a][b][l] += ra[a][k + l] * rb[b][k + l];
            }
        }
    }
#endif
    for (k = kmain; k < p; k++) {
        l = (int)(k - kmain);
        for (a = 0; a < HD_TILE; a++)
            for (b = 0; b < HD_TILE; b++)
                acc[a][b][l] += ra[a][k] * rb[b][k];
    }
    for (a = 0; a < na; a++)
        for (b = 0; b < nb; b++)
            out[a * ldo + b] = hd_combine(acc[a][b]);
}

static inline double hd_f(int family, double x, double param)
{
    switch (family) {
    case HD_GAUSSIAN:
        return exp(-x);
    case HD_LAPLACE:
        return exp(-sqrt(x));
    case HD_RQ:
        return pow(1.0 + x, -param);
    case HD_ENERGY:
        return -sqrt(x);
    default:
        return -x;
    }
}

/* Sum of f(max(G_ii + G_jj - 2 G_ij, 0) / gamma) over j in [j0, j1). */
static inline double hd_row_kernel_sum(const double *G, ptrdiff_t ldg,
                                       ptrdiff_t i, ptrdiff_t j0, ptrdiff_t j1,
                                       int family, double param, double gamma)
{
    const double *row = G + i * ldg;
    double gii = row[i];
    double s = 0.0, c = 0.0, t, v, d;
    ptrdiff_t j;

    for (j = j0; j < j1; j++) {
        d = (gii + G[j * ldg + j]) - 2.0 * row[j];
        if (d < 0.0)
            d = 0.0;
        v = hd_f(family, d / gamma, param);
        /* Neumaier compensation: the statistic is a small difference of
         * large sums. */
        t = s + v;
        if (fabs(s) >= fabs(v))
            c += (s - t) + v;
        else
            c += (v - t) + s;
        s = t;
    }
    return s + c;
}

#endif
