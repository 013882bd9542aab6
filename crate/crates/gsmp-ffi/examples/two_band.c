/* Solves the two-band potential, runs the flow from the q = 0 point and
 * prints the first Jacobi coefficients. */
#include <stdio.h>

#include "gsmp.h"

static int check(GsmpStatus s, const char *what) {
    if (s != GSMP_STATUS_OK) {
        const char *msg = gsmp_last_error_message();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "");
        return 1;
    }
    return 0;
}

int main(void) {
    const double edges[] = {-2.0, -1.0, 1.0, 2.0};
    GsmpPotential *v = NULL;
    if (check(gsmp_potential_solve(edges, 4, 1e-13, 200, &v), "potential")) return 1;

    double lambda0, c0, res[1], pole[1];
    if (check(gsmp_potential_params(v, &lambda0, &c0, res, pole, 1), "params")) return 1;
    printf("V: %.17g %.17g %.17g %.17g\n", lambda0, c0, res[0], pole[0]);

    GsmpTorus *t = NULL;
    if (check(gsmp_torus_sample(v, 1, 1, 1e-13, &t), "torus")) return 1;
    double p[2], q[2];
    if (check(gsmp_torus_point(t, 0, p, q, 2), "point")) return 1;

    GsmpWindow *w = NULL;
    if (check(gsmp_window_periodic(v, p, q, 20, &w), "window")) return 1;
    GsmpFlowTrace *tr = NULL;
    if (check(gsmp_flow_run(w, 10, GSMP_FLOW_MODE_DUAL, 1e-10, &tr), "flow")) return 1;
    double a[10], b[10];
    size_t n = 0;
    if (check(gsmp_flow_jacobi(tr, a, b, 10, &n), "jacobi")) return 1;
    for (size_t i = 0; i < n; i++) printf("%zu %.17g %.17g\n", i, a[i], b[i]);

    double dummy;
    if (gsmp_potential_params(NULL, &dummy, &dummy, NULL, NULL, 0) != GSMP_STATUS_NULL_POINTER) return 1;

    gsmp_flow_free(tr);
    gsmp_window_free(w);
    gsmp_torus_free(t);
    gsmp_potential_free(v);
    return 0;
}
