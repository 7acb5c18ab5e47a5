method addM (a : int, b : int) returns (c : int) { c := a + b; }
function method addF (a : int, b : int) : int { a + b }

method Main() {
     var x, y := 2, 3;
     var m := addM(x,y);
     var f := addF(x,y);
     assert m == x + y;   //Fails to verify
     assert f == x + y;   //Verifies
}
