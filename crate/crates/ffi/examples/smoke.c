#include <stdio.h>
#include <string.h>

#include "bondtca.h"

int main(void) {
    double x[] = {1, 2, 3, 4, 5};
    double y[] = {3, 5, 7, 9, 11};
    double coef[2];
    BondtcaFit *fit = NULL;
    if (bondtca_fit("ols", x, y, 5, 1, 0.0, 0.0, &fit) != BONDTCA_OK) {
        fprintf(stderr, "fit: %s\n", bondtca_last_error());
        return 1;
    }
    bondtca_fit_coefficients(fit, coef, 2);
    bondtca_fit_free(fit);
    printf("%.6f %.6f\n", coef[0], coef[1]);

    int code = bondtca_fit("bogus", x, y, 5, 1, 0.0, 0.0, &fit);
    printf("%d %s\n", code, strlen(bondtca_last_error()) > 0 ? "message" : "empty");
    return 0;
}
