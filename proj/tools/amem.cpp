#include <cstdio>

int main() {
    std::puts("amem: cli under construction");
    return 0;
}
