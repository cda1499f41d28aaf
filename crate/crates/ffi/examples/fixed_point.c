/* Build: cc fixed_point.c -I../include ../../../target/release/liburnwalk_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "urnwalk.h"

static const char *CONFIG =
    "[model]\np = 1\nq = 0.5\nq1 = 0.9\nq2 = 0.9\ninit_len = 10\n"
    "[reinforcement]\nkind = affine\nc0 = 0.5\na = 0.45\nb = -0.45\n"
    "[law]\nkind = fixed\nk = 5\n"
    "[run]\nn_max = 10000\nreplications = 10\n"
    "[analysis]\ncheck_strong_law = true\n";

int main(void) {
    UwModel *model = NULL;
    if (uw_model_new(CONFIG, &model) != UW_STATUS_OK) {
        fprintf(stderr, "%s\n", uw_last_error_message());
        return 1;
    }
    UwFixedPoint fp;
    UwAsymptotics as;
    if (uw_fixed_point(model, &fp) != UW_STATUS_OK || uw_asymptotics(model, &as) != UW_STATUS_OK) {
        fprintf(stderr, "%s\n", uw_last_error_message());
        uw_model_free(model);
        return 1;
    }
    printf("urnwalk %s\n", uw_version());
    printf("x* = %.6f  y* = %.6f  z* = %.6f  kappa = %.4f\n", fp.x, fp.y, fp.z, fp.kappa);
    if (as.has_direction)
        printf("direction = (%.4f, %.4f, %.4f), rate n^%.2f\n", as.direction[0], as.direction[1],
               as.direction[2], as.scaling_exponent);
    uw_model_free(model);
    return 0;
}
