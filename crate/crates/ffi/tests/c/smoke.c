#include <stdio.h>
#include <string.h>
#include "structkde.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        SkStatus st_ = (call);                                             \
        if (st_ != SK_STATUS_OK) {                                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, st_, sk_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    SkKernel *k = NULL;
    SkModel *m = NULL;
    SkSample *s = NULL;
    SkNet *net = NULL;
    double v = 0.0;
    size_t len = 0;
    SkSelection sel;

    CHECK(sk_kernel_new(1, &k));
    CHECK(sk_kernel_eval(k, 0.0, &v));
    if (v != 1.125) return 2;

    CHECK(sk_model_perturbed(2.0, 1.0, 0.5, 0.0, &m));
    CHECK(sk_model_sample(m, 500, 7, &s));
    CHECK(sk_sample_len(s, &len));
    if (len != 500) return 3;

    CHECK(sk_net_new(0.6, &net));
    CHECK(sk_net_len(net, &len));
    if (len != 2) return 4;

    CHECK(sk_product_estimate(k, s, 0.0, 0.0, 0.4, 0.0, &v));
    CHECK(sk_adaptive_select(k, s, net, 0.0, 0.0, 2.0, 0.01, &sel));
    printf("product %.6f adaptive %.6f h %.6f theta %.1f\n", v, sel.estimate, sel.h_hat, sel.theta_q);

    if (sk_net_new(1.5, &net) != SK_STATUS_INVALID_ARGUMENT) return 5;
    if (strstr(sk_last_error(), "delta") == NULL) return 6;
    if (sk_kernel_eval(NULL, 0.0, &v) != SK_STATUS_NULL_POINTER) return 7;

    sk_sample_free(s);
    sk_model_free(m);
    sk_net_free(net);
    sk_kernel_free(k);
    return 0;
}
