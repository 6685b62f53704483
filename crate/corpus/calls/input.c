extern int printf();

int counter = 0;
int log_level = 2;

void bump() {
    counter = counter + 1;
}

void bump_twice() {
    bump();
    bump();
}

void trace(int v) {
    if (log_level > 3) {
        printf("trace %d\n", v);
    }
}

int main() {
    bump_twice();
    trace(counter);
    bump();
    printf("%d\n", counter);
    return 0;
}
