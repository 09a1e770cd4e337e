/* Copyright 2026 The coherence-lab Contributors */
/* SPDX-License-Identifier: Apache-2.0 */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "coherence_lab.h"

int main(void) {
    ClSystem *sys = NULL;
    ClBath *bath = NULL;
    if (cl_system_new(1.0, 0.9, 0.6, 0.8, &sys) != CL_STATUS_OK) return 1;
    if (cl_bath_super_ohmic_new(0.001, 0.9, 3.0, 0.52, &bath) != CL_STATUS_OK) return 2;

    double times[3] = {0.0, 1.0, 2.0};
    ClMoments m[3];
    if (cl_moments(sys, bath, CL_METHOD_SECULAR, times, 3, m) != CL_STATUS_OK) return 3;
    if (m[2].f_ab_re != 0.0 || m[2].f_aa <= 0.0) return 4;

    ClPole poles[4];
    size_t count = 0;
    if (cl_find_poles(sys, bath, poles, 4, &count) != CL_STATUS_OK || count != 2) return 5;

    ClSystem *bad = NULL;
    if (cl_system_new(NAN, 0.9, 0.6, 0.8, &bad) == CL_STATUS_OK) return 6;
    char buf[256];
    if (cl_last_error(buf, sizeof buf) == 0 || strlen(buf) == 0) return 7;

    cl_bath_free(bath);
    cl_system_free(sys);
    printf("ok %s\n", cl_version());
    return 0;
}
