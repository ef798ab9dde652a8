#include <stdio.h>
#include <string.h>
#include "qbm.h"

int main(void) {
    QbmBath *bath = NULL;
    if (qbm_bath_new(1.0, 0.5, 1.0, 1.0, 0.0, &bath) != QBM_STATUS_OK) return 1;
    double c0 = 0.0;
    if (qbm_bath_noise_correlation(bath, 0.0, &c0) != QBM_STATUS_OK) return 2;
    qbm_bath_free(bath);
    /* (m gamma hbar / pi) / eps^2 */
    double want = 1.0 / 3.141592653589793 / 0.25;
    if (c0 < want * (1 - 1e-6) || c0 > want * (1 + 1e-6)) return 3;

    QbmBath *bad = NULL;
    if (qbm_bath_new(1.0, 0.5, -1.0, 1.0, 0.0, &bad) != QBM_STATUS_CONFIG) return 4;
    if (bad != NULL || strstr(qbm_last_error(), "mass") == NULL) return 5;
    printf("%s ok\n", qbm_version());
    return 0;
}
