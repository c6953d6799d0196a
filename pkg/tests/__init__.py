# NTN Split Simulator - Test Suite
