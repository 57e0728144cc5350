#include <math.h>
#include <stdio.h>
#include "dlreg.h"

int main(void) {
    enum { N = 60 };
    double y[N], x[N], u[N], z[N];
    for (int i = 0; i < N; i++) {
        double t = (double)i / N;
        z[i] = sin(7.0 * t);
        x[i] = 2.0 + z[i] + 0.3 * cos(13.0 * t);
        u[i] = cos(5.0 * t);
        y[i] = 1.0 + 0.5 * x[i] - u[i] + 0.2 * sin(31.0 * t);
    }
    DlregDataset *d = NULL;
    if (dlreg_dataset_new(N, y, x, NULL, 1, u, 1, z, 2.0, &d) != DLREG_STATUS_OK) return 1;
    DlregFitOptions o = dlreg_fit_options_default();
    DlregFit *f = NULL;
    if (dlreg_fit(d, &o, &f) != DLREG_STATUS_OK) {
        fprintf(stderr, "%s\n", dlreg_last_error_message());
        return 2;
    }
    double beta[3];
    if (dlreg_fit_coefficients(f, beta, 3) != DLREG_STATUS_OK) return 3;
    printf("%.6f %.6f %.6f\n", beta[0], beta[1], beta[2]);
    dlreg_fit_free(f);
    dlreg_dataset_free(d);
    return 0;
}
