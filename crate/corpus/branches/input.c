extern int printf();

int classify(int x) {
    int kind = 0;
    if (x < 0) {
        kind = 1;
    } else if (x == 0) {
        kind = 2;
    } else {
        kind = 3;
    }
    return kind;
}

int main() {
    int neg = classify(-4);
    int zero = classify(0);
    int verbose = 0;
    if (verbose) {
        printf("neg %d\n", neg);
    }
    printf("zero %d\n", zero);
    return 0;
}
