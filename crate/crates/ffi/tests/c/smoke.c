#include <math.h>
#include <stdio.h>
#include "twoclust.h"

int main(void) {
    enum { N = 120, K = 2 };
    double y[N], x[N * K];
    int64_t g[N], h[N];
    unsigned s = 7;
    for (int i = 0; i < N; i++) {
        s = s * 1103515245u + 12345u;
        double a = (double)(s >> 8) / 16777216.0 - 0.5;
        s = s * 1103515245u + 12345u;
        double e = (double)(s >> 8) / 16777216.0 - 0.5;
        x[i * K] = a;
        x[i * K + 1] = 1.0;
        y[i] = 0.3 * a + e;
        g[i] = i % 5;
        h[i] = (i / 4) % 6;
    }
    TcDataset *ds = NULL;
    if (tc_dataset_new(y, x, N, K, g, h, 0, &ds) != TC_STATUS_OK) return 1;
    TcFit *fit = NULL;
    if (tc_fit(ds, 0.95, 0.0, &fit) != TC_STATUS_OK) return 2;
    if (tc_fit_n_rows(fit) != 16) return 3;
    TcRow row;
    if (tc_fit_row(fit, 15, &row) != TC_STATUS_OK) return 4;
    if (row.family != TC_FAMILY_CV3 || row.arity != TC_ARITY_MAX) return 5;
    if (tc_fit_row(fit, 16, &row) != TC_STATUS_OUT_OF_RANGE) return 6;
    TcDiag d;
    if (tc_fit_diagnostics(fit, TC_DIM_I, &d) != TC_STATUS_OK) return 7;
    printf("%.17g %llu\n", tc_fit_estimate(fit), (unsigned long long)d.n_clusters);
    tc_fit_free(fit);
    tc_dataset_free(ds);
    return 0;
}
