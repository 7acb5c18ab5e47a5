//complete the following method which returns the "real"
//sum and product of its two real arguments
method SumAndDifference(a : real, b : real) [???]

//Hint: https://www.youtube.com/watch?v=kqFPDrDWAHs
