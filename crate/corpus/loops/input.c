extern int printf();

/* two accumulators, only one of which is observed */
int sum_to(int n) {
    int s = 0;
    int i = 0;
    while (i < n) {
        s = s + i;
        i = i + 1;
    }
    return s;
}

int product_to(int n) {
    int p = 1;
    int i;
    for (i = 1; i <= n; i = i + 1) {
        p = p * i;
    }
    return p;
}

int main() {
    int total = sum_to(10);
    int fact = product_to(5);
    printf("%d\n", total);
    printf("%d\n", fact);
    return 0;
}
