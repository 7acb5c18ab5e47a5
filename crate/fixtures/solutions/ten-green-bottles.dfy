method Main() {
  var n := ["no","one","two","three","four","five","six","seven","eight","nine","ten"];
  var u := ["","One","Two","Three","Four","Five","Six","Seven","Eight","Nine","Ten"];
  var i := 10;
  while i > 0
    invariant 0 <= i <= 10
  {
    var b := if i == 1 then " bottle" else " bottles";
    var c := if i == 2 then " bottle" else " bottles";
    var l := u[i] + " green" + b + " hanging on the wall\n";
    print l, l, "If one green bottle should accidentally fall,\nThere'll be ";
    print n[i - 1], " green", c, " hanging on the wall\n";
    i := i - 1;
  }
}
