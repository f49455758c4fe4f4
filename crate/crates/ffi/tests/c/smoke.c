#include <math.h>
#include <stdio.h>
#include <string.h>

#include "switchopt.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        enum SwoStatus st_ = (call);                                       \
        if (st_ != SWO_OK) {                                               \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_,             \
                    swo_last_error_message());                             \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    SwoProblem *p = NULL;
    SwoSignal *s = NULL, *pure = NULL;
    size_t n_x = 0, n_sigma = 0;
    double t_f = 0.0, x[2], cost = 0.0, theta = 0.0;

    if (swo_problem_builtin("nope", &p) != SWO_UNKNOWN_PROBLEM || strlen(swo_last_error_message()) == 0)
        return 2;
    CHECK(swo_problem_builtin("paper_example", &p));
    CHECK(swo_problem_dims(p, &n_x, &n_sigma, &t_f));
    if (n_x != 2 || n_sigma != 2 || t_f != 2.0)
        return 3;

    double w[4] = {0.5, 0.5, 0.5, 0.5};
    CHECK(swo_signal_new(t_f, 2, 2, w, &s));
    CHECK(swo_project(s, 2, &pure));
    CHECK(swo_simulate(p, pure, 4, x, 2, &cost));
    CHECK(swo_theta(p, s, 4, &theta, NULL));
    if (!(theta <= 0.0) || !(cost > 0.0))
        return 4;
    if (swo_simulate(p, pure, 4, x, 1, NULL) != SWO_BUFFER_TOO_SMALL)
        return 5;

    printf("x(tf) = (%.6f, %.6f) J = %.6f theta = %.6f\n", x[0], x[1], cost, theta);
    swo_signal_free(pure);
    swo_signal_free(s);
    swo_problem_free(p);
    return 0;
}
