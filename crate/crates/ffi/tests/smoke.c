#include <stdio.h>
#include <string.h>
#include "cyclone_tipping.h"

int main(void) {
    CtModel *model = NULL;
    if (ct_model_new(0.43, 0.286, &model) != CT_STATUS_OK) return 10;
    CtFixedPoints fp;
    if (ct_model_fixed_points(model, &fp) != CT_STATUS_OK || fp.count != 3) return 11;
    printf("U %.7f %.8f\n", fp.v[1], fp.m[1]);

    CtModel *bad = NULL;
    if (ct_model_new(1.5, 0.286, &bad) != CT_STATUS_INVALID_ARGUMENT || bad != NULL) return 12;
    if (ct_last_error_message() == NULL) return 13;

    CtText *text = NULL;
    if (ct_run_command("fixed-points", NULL, &text) != CT_STATUS_OK) return 14;
    if (strstr(ct_text_data(text), "three-equilibria") == NULL) return 15;
    ct_text_free(text);

    ct_model_free(model);
    printf("version %s\n", ct_version());
    return 0;
}
