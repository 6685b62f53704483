extern int printf();

int a_count = 0;
int b_total = 0;

void feature_a(int n) {
    int i;
    for (i = 0; i < n; i = i + 1) {
        a_count = a_count + i;
    }
    printf("a %d\n", a_count);
}

int feature_b(int x) {
    int y = x * 3;
    b_total = b_total + y;
    return b_total;
}

int main() {
    int mode = 1;
    feature_a(4);
    if (mode == 2) {
        printf("b %d\n", feature_b(5));
    }
    return 0;
}
