extern int printf();

int scale(int v) {
    return v * 10;
}

int offset(int v) {
    return v + 7;
}

int main() {
    int a = 3;
    int b = scale(a);
    int c = offset(b);
    int d = c - a;
    int e = d * 2;
    printf("%d\n", c);
    printf("%d\n", e);
    return 0;
}
